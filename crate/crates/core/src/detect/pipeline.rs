use image::RgbImage;

use super::classifier::PatchClassifier;
use super::{Detection, OcclusionParams, PipelineParams, Rect};
use crate::components::{blob, find_components};
use crate::exec::Execution;
use crate::gaze::{ImagePoint, ImageSize};
use crate::Result;

/// Window start offsets along one axis: `0, stride, 2·stride, …` with the
/// last window flush against the far edge. When the regular grid stops
/// short of the edge, its last window is moved flush if that leaves no
/// gap, otherwise a flush window is appended. Either way every pixel is
/// covered and a 1600 px axis with 240 px patches and stride 60 gets
/// `⌊(1600 − 240) / 60⌋ + 1 = 23` windows. Empty when `patch > extent`.
pub fn window_offsets(extent: u32, patch: u32, stride: u32) -> Vec<u32> {
    if patch > extent || stride == 0 {
        return Vec::new();
    }
    let last = extent - patch;
    let mut out: Vec<u32> = (0..=last).step_by(stride as usize).collect();
    let end = *out.last().expect("offset 0 always fits");
    if end != last {
        let n = out.len();
        if n >= 2 && last - out[n - 2] <= patch {
            out[n - 1] = last;
        } else {
            out.push(last);
        }
    }
    out
}

/// All windows of the sliding-window grid, row-major.
pub fn windows(size: ImageSize, patch: u32, stride: u32) -> Vec<Rect> {
    let xs = window_offsets(size.width, patch, stride);
    let ys = window_offsets(size.height, patch, stride);
    ys.iter()
        .flat_map(|&y| xs.iter().map(move |&x| Rect::square(x, y, patch)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredWindow {
    pub rect: Rect,
    pub probability: f64,
}

pub(crate) fn score_windows<C: PatchClassifier>(
    classifier: &C,
    prepared: &C::Prepared,
    size: ImageSize,
    patch: u32,
    stride: u32,
    execution: Execution,
) -> Vec<ScoredWindow> {
    let rects = windows(size, patch, stride);
    execution.map(&rects, |&rect| ScoredWindow {
        rect,
        probability: classifier.classify(prepared, rect),
    })
}

fn positive_windows<C: PatchClassifier>(
    classifier: &C,
    prepared: &C::Prepared,
    size: ImageSize,
    params: &PipelineParams,
    execution: Execution,
) -> Vec<ScoredWindow> {
    score_windows(classifier, prepared, size, params.patch_size, params.stride, execution)
        .into_iter()
        .filter(|w| w.probability >= params.positive_threshold)
        .collect()
}

/// Windows whose probability reaches the positive threshold, row-major.
pub fn slide_classify<C: PatchClassifier>(
    image: &RgbImage,
    classifier: &C,
    params: &PipelineParams,
    execution: Execution,
) -> Result<Vec<ScoredWindow>> {
    params.validate()?;
    let size = ImageSize::new(image.width(), image.height());
    params.check_image(size)?;
    let prepared = classifier.prepare(image);
    Ok(positive_windows(classifier, &prepared, size, params, execution))
}

/// A scalar field over image pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyField {
    size: ImageSize,
    values: Vec<f64>,
}

impl SaliencyField {
    pub fn zeros(size: ImageSize) -> Self {
        SaliencyField {
            size,
            values: vec![0.0; size.pixel_count()],
        }
    }

    pub fn from_fn(size: ImageSize, mut f: impl FnMut(u32, u32) -> f64) -> Self {
        let mut field = SaliencyField::zeros(size);
        for y in 0..size.height {
            for x in 0..size.width {
                field.values[y as usize * size.width as usize + x as usize] = f(x, y);
            }
        }
        field
    }

    pub fn size(&self) -> ImageSize {
        self.size
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.size.width as usize + x as usize]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    fn raise(&mut self, r: Rect, value: f64) {
        let w = self.size.width as usize;
        for y in r.y..r.bottom().min(self.size.height) {
            let row = &mut self.values[y as usize * w..(y as usize + 1) * w];
            for v in &mut row[r.x as usize..(r.right() as usize).min(w)] {
                *v = v.max(value);
            }
        }
    }
}

/// Produces a saliency field from the positive windows of an image.
pub trait SaliencyProvider: Sync {
    fn saliency<C: PatchClassifier>(
        &self,
        classifier: &C,
        prepared: &C::Prepared,
        size: ImageSize,
        boxes: &[ScoredWindow],
    ) -> SaliencyField;
}

/// Occlusion saliency: slide a mask over each positive box and record how
/// far the box probability drops. A pixel takes the largest drop of any
/// mask covering it, over all boxes; pixels outside every box stay 0.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OcclusionSaliency {
    pub params: OcclusionParams,
}

impl SaliencyProvider for OcclusionSaliency {
    fn saliency<C: PatchClassifier>(
        &self,
        classifier: &C,
        prepared: &C::Prepared,
        size: ImageSize,
        boxes: &[ScoredWindow],
    ) -> SaliencyField {
        let mut field = SaliencyField::zeros(size);
        let OcclusionParams { mask_size, stride } = self.params;
        for b in boxes {
            let r = b.rect;
            let masks: Vec<Rect> = window_offsets(r.height, mask_size.min(r.height), stride)
                .into_iter()
                .flat_map(|dy| {
                    window_offsets(r.width, mask_size.min(r.width), stride)
                        .into_iter()
                        .map(move |dx| {
                            Rect::new(r.x + dx, r.y + dy, mask_size.min(r.width), mask_size.min(r.height))
                        })
                })
                .collect();
            let probs = classifier.classify_occlusions(prepared, r, &masks);
            for (m, p) in masks.iter().zip(probs) {
                let drop = b.probability - p;
                if drop > 0.0 {
                    field.raise(*m, drop);
                }
            }
        }
        field
    }
}

/// Centroids of the field's hotspots: 8-connected regions at or above
/// `fraction` of the field maximum with at least `min_area` pixels,
/// weighted by field value.
pub fn extract_locations(field: &SaliencyField, fraction: f64, min_area: usize) -> Vec<ImagePoint> {
    let max = field.max();
    if max <= 0.0 {
        return Vec::new();
    }
    let cutoff = fraction * max;
    let on: Vec<u32> = field
        .values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= cutoff && v > 0.0)
        .map(|(i, _)| i as u32)
        .collect();
    let weight = |i: u32| field.values[i as usize];
    find_components(field.size, &on)
        .into_iter()
        .filter(|c| c.len() >= min_area)
        .map(|c| blob(field.size, &c, Some(&weight)).centroid)
        .collect()
}

pub(crate) fn score_prepared<C: PatchClassifier>(
    classifier: &C,
    prepared: &C::Prepared,
    size: ImageSize,
    points: &[ImagePoint],
    patch: u32,
    image_id: &str,
) -> Vec<Detection> {
    points
        .iter()
        .map(|&p| Detection {
            image_id: image_id.to_string(),
            x: p.x,
            y: p.y,
            probability: classifier
                .classify(prepared, Rect::centered_clamped(p, patch, size))
                .clamp(0.0, 1.0),
        })
        .collect()
}

/// Re-score a patch centred on each point, shifted to lie inside the image.
pub fn score_locations<C: PatchClassifier>(
    image: &RgbImage,
    points: &[ImagePoint],
    classifier: &C,
    patch_size: u32,
    image_id: &str,
) -> Result<Vec<Detection>> {
    let size = ImageSize::new(image.width(), image.height());
    PipelineParams {
        patch_size,
        stride: patch_size.max(1),
        ..PipelineParams::default()
    }
    .check_image(size)?;
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let prepared = classifier.prepare(image);
    Ok(score_prepared(classifier, &prepared, size, points, patch_size, image_id))
}

/// Saliency field from an image: classify windows, then run the provider on
/// the positive ones.
pub fn saliency_map<C: PatchClassifier, S: SaliencyProvider>(
    image: &RgbImage,
    boxes: &[ScoredWindow],
    classifier: &C,
    provider: &S,
) -> SaliencyField {
    let size = ImageSize::new(image.width(), image.height());
    if boxes.is_empty() {
        return SaliencyField::zeros(size);
    }
    let prepared = classifier.prepare(image);
    provider.saliency(classifier, &prepared, size, boxes)
}

/// The whole pipeline on one image.
pub fn detect<C: PatchClassifier, S: SaliencyProvider>(
    image: &RgbImage,
    image_id: &str,
    classifier: &C,
    provider: &S,
    params: &PipelineParams,
    execution: Execution,
) -> Result<Vec<Detection>> {
    params.validate()?;
    let size = ImageSize::new(image.width(), image.height());
    params.check_image(size)?;
    let prepared = classifier.prepare(image);
    let boxes = positive_windows(classifier, &prepared, size, params, execution);
    if boxes.is_empty() {
        return Ok(Vec::new());
    }
    let field = provider.saliency(classifier, &prepared, size, &boxes);
    let points = extract_locations(&field, params.hotspot_fraction, params.hotspot_min_area);
    Ok(score_prepared(classifier, &prepared, size, &points, params.patch_size, image_id))
}
