//! Sliding-window localization over a pluggable patch classifier.
//!
//! The pipeline runs in four steps: classify overlapping windows, turn the
//! positive windows into a saliency field, take centroids of the field's
//! hotspots, then re-score a patch centred on each centroid. The classifier
//! and the saliency provider are traits; [`ReferenceClassifier`] and
//! [`OcclusionSaliency`] are small stand-ins that run on a laptop.

mod classifier;
mod pipeline;
mod reference;
mod train;

use serde::{Deserialize, Serialize};

use crate::gaze::{ImagePoint, ImageSize};
use crate::{Error, Result};

pub use classifier::{ConstantClassifier, OracleClassifier, PatchClassifier};
pub use pipeline::{
    detect, extract_locations, saliency_map, score_locations, slide_classify, window_offsets, windows,
    OcclusionSaliency, SaliencyField, SaliencyProvider, ScoredWindow,
};
pub use reference::{hsv_bin, HsvBinMap, ReferenceClassifier, N_BINS};
pub use train::{
    train_two_iteration, IterationReport, LabeledImage, TrainConfig, TrainReport, Trainable,
};

/// A located object with the classifier's probability for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: String,
    pub x: f64,
    pub y: f64,
    pub probability: f64,
}

impl Detection {
    pub fn point(&self) -> ImagePoint {
        ImagePoint::new(self.x, self.y)
    }
}

/// Axis-aligned pixel rectangle `[x, x + width) × [y, y + height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl Rect {
    pub const fn new(x: u32, y: u32, width: u32, height: u32) -> Self {
        Rect {
            x,
            y,
            width,
            height,
        }
    }

    pub fn square(x: u32, y: u32, side: u32) -> Self {
        Rect::new(x, y, side, side)
    }

    pub fn right(&self) -> u32 {
        self.x + self.width
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.height
    }

    pub fn area(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    pub fn contains_point(&self, p: ImagePoint) -> bool {
        p.x >= self.x as f64
            && p.y >= self.y as f64
            && p.x < self.right() as f64
            && p.y < self.bottom() as f64
    }

    pub fn center(&self) -> ImagePoint {
        ImagePoint::new(
            self.x as f64 + self.width as f64 / 2.0,
            self.y as f64 + self.height as f64 / 2.0,
        )
    }

    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x0 < x1 && y0 < y1).then(|| Rect::new(x0, y0, x1 - x0, y1 - y0))
    }

    /// A `side`-square centred on `p` and shifted to lie inside `size`.
    /// `side` must not exceed either image dimension.
    pub fn centered_clamped(p: ImagePoint, side: u32, size: ImageSize) -> Rect {
        let clamp = |c: f64, extent: u32| -> u32 {
            let start = (c - side as f64 / 2.0).round();
            start.clamp(0.0, (extent - side) as f64) as u32
        };
        Rect::square(clamp(p.x, size.width), clamp(p.y, size.height), side)
    }
}

/// Occlusion settings for [`OcclusionSaliency`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcclusionParams {
    pub mask_size: u32,
    pub stride: u32,
}

impl Default for OcclusionParams {
    fn default() -> Self {
        OcclusionParams {
            mask_size: 40,
            stride: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineParams {
    pub patch_size: u32,
    pub stride: u32,
    /// Windows scoring at least this are positive boxes.
    pub positive_threshold: f64,
    pub occlusion: OcclusionParams,
    /// Hotspots are cells at or above this fraction of the field maximum.
    pub hotspot_fraction: f64,
    pub hotspot_min_area: usize,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            patch_size: 240,
            stride: 60,
            positive_threshold: 0.5,
            occlusion: OcclusionParams::default(),
            hotspot_fraction: 0.5,
            hotspot_min_area: 100,
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || self.stride == 0 || self.stride > self.patch_size {
            return Err(Error::invalid(format!(
                "need 0 < stride <= patch size, got stride {} and patch {}",
                self.stride, self.patch_size
            )));
        }
        if !(0.0..=1.0).contains(&self.positive_threshold) {
            return Err(Error::invalid("positive threshold must lie in [0, 1]"));
        }
        if self.occlusion.mask_size == 0 || self.occlusion.stride == 0 {
            return Err(Error::invalid("occlusion mask and stride must be positive"));
        }
        if !(self.hotspot_fraction > 0.0 && self.hotspot_fraction <= 1.0) {
            return Err(Error::invalid("hotspot fraction must lie in (0, 1]"));
        }
        Ok(())
    }

    pub(crate) fn check_image(&self, size: ImageSize) -> Result<()> {
        if size.width < self.patch_size || size.height < self.patch_size {
            return Err(Error::ImageTooSmall {
                width: size.width,
                height: size.height,
                patch: self.patch_size,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamped_patch_stays_inside() {
        let size = ImageSize::square(1600);
        let r = Rect::centered_clamped(ImagePoint::new(0.0, 1599.0), 240, size);
        assert_eq!(r, Rect::square(0, 1360, 240));
        let r = Rect::centered_clamped(ImagePoint::new(800.0, 800.0), 240, size);
        assert_eq!(r, Rect::square(680, 680, 240));
    }

    #[test]
    fn intersection() {
        let a = Rect::new(0, 0, 10, 10);
        assert_eq!(a.intersect(&Rect::new(5, 8, 10, 10)), Some(Rect::new(5, 8, 5, 2)));
        assert_eq!(a.intersect(&Rect::new(10, 0, 3, 3)), None);
    }

    #[test]
    fn params_validate() {
        assert!(PipelineParams::default().validate().is_ok());
        let bad = PipelineParams {
            stride: 241,
            ..PipelineParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
