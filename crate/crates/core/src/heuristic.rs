//! Color baseline: brown (DAB-like) pigment blobs become point labels.

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::components::{blob, Mask};
use crate::consensus::ConsensusLabel;
use crate::gaze::ImageSize;
use crate::{Error, Result};

/// Hexcone HSV of an 8-bit RGB pixel: hue in degrees `[0, 360)`, saturation
/// and value in `[0, 1]`.
pub fn rgb_to_hsv(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    let (rf, gf, bf) = (r as f64, g as f64, b as f64);
    let max = rf.max(gf).max(bf);
    let min = rf.min(gf).min(bf);
    let d = max - min;
    let v = max / 255.0;
    let s = if max > 0.0 { d / max } else { 0.0 };
    let h = if d == 0.0 {
        0.0
    } else if max == rf {
        60.0 * ((gf - bf) / d).rem_euclid(6.0)
    } else if max == gf {
        60.0 * ((bf - rf) / d + 2.0)
    } else {
        60.0 * ((rf - gf) / d + 4.0)
    };
    (if h >= 360.0 { h - 360.0 } else { h }, s, v)
}

/// An HSV box. A hue range with `hue_min > hue_max` wraps through 0°.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsvRange {
    pub hue_min: f64,
    pub hue_max: f64,
    pub sat_min: f64,
    pub sat_max: f64,
    pub val_min: f64,
    pub val_max: f64,
    /// Smallest blob kept, in pixels.
    pub min_area: usize,
}

impl Default for HsvRange {
    fn default() -> Self {
        HsvRange {
            hue_min: 10.0,
            hue_max: 45.0,
            sat_min: 0.25,
            sat_max: 1.0,
            val_min: 0.15,
            val_max: 0.85,
            min_area: 100,
        }
    }
}

impl HsvRange {
    pub fn validate(&self) -> Result<()> {
        let hue_ok = |h: f64| (0.0..=360.0).contains(&h);
        let unit_ok = |lo: f64, hi: f64| (0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi) && lo <= hi;
        if !hue_ok(self.hue_min) || !hue_ok(self.hue_max) {
            return Err(Error::invalid("hue bounds must lie in [0, 360]"));
        }
        if !unit_ok(self.sat_min, self.sat_max) {
            return Err(Error::invalid("saturation bounds must satisfy 0 <= min <= max <= 1"));
        }
        if !unit_ok(self.val_min, self.val_max) {
            return Err(Error::invalid("value bounds must satisfy 0 <= min <= max <= 1"));
        }
        Ok(())
    }

    pub fn contains(&self, h: f64, s: f64, v: f64) -> bool {
        let hue_in = if self.hue_min <= self.hue_max {
            h >= self.hue_min && h <= self.hue_max
        } else {
            h >= self.hue_min || h <= self.hue_max
        };
        hue_in && s >= self.sat_min && s <= self.sat_max && v >= self.val_min && v <= self.val_max
    }

    pub fn contains_rgb(&self, rgb: [u8; 3]) -> bool {
        let (h, s, v) = rgb_to_hsv(rgb[0], rgb[1], rgb[2]);
        self.contains(h, s, v)
    }
}

/// Pixels inside `range`, with blobs smaller than `range.min_area` removed.
pub fn brown_mask(image: &RgbImage, range: &HsvRange) -> Mask {
    let size = ImageSize::new(image.width(), image.height());
    let mask = Mask::from_fn(size, |x, y| range.contains_rgb(image.get_pixel(x, y).0));
    mask.remove_small(range.min_area)
}

/// One label per 8-connected in-range blob, at the blob's pixel centroid.
/// `peak` is 1 since the mask is binary.
pub fn detect_brown(image: &RgbImage, range: &HsvRange, image_id: &str) -> Vec<ConsensusLabel> {
    let mask = brown_mask(image, range);
    mask.components()
        .iter()
        .map(|comp| {
            let b = blob(mask.size(), comp, None);
            ConsensusLabel {
                image_id: image_id.to_string(),
                x: b.centroid.x,
                y: b.centroid.y,
                area: b.area,
                peak: 1.0,
            }
        })
        .collect()
}
