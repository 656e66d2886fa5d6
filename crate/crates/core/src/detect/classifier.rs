use image::RgbImage;

use super::Rect;
use crate::gaze::ImagePoint;

/// A patch-level mitosis classifier.
///
/// Classification goes through a per-image [`Prepared`](Self::Prepared)
/// value so that work shared by overlapping windows is done once. Both
/// `classify` methods must return a probability in `[0, 1]` and must be pure:
/// the same inputs always give the same output, from any thread.
pub trait PatchClassifier: Sync {
    type Prepared: Sync;

    fn prepare(&self, image: &RgbImage) -> Self::Prepared;

    /// Probability that `window` shows the object of interest.
    fn classify(&self, prepared: &Self::Prepared, window: Rect) -> f64;

    /// Probability for `window` with the part covered by `mask` hidden.
    /// How the hidden part is filled is up to the implementation.
    fn classify_occluded(&self, prepared: &Self::Prepared, window: Rect, mask: Rect) -> f64;

    fn classify_occlusions(&self, prepared: &Self::Prepared, window: Rect, masks: &[Rect]) -> Vec<f64> {
        masks
            .iter()
            .map(|m| self.classify_occluded(prepared, window, *m))
            .collect()
    }

    /// Classify a whole image as one patch.
    fn classify_patch(&self, patch: &RgbImage) -> f64 {
        let prepared = self.prepare(patch);
        self.classify(&prepared, Rect::new(0, 0, patch.width(), patch.height()))
    }
}

/// Knows where the objects are: 1 if the window contains an object centre
/// that is not hidden by the mask, else 0. Built per image.
#[derive(Debug, Clone, Default)]
pub struct OracleClassifier {
    pub objects: Vec<ImagePoint>,
}

impl OracleClassifier {
    pub fn new(objects: Vec<ImagePoint>) -> Self {
        OracleClassifier { objects }
    }
}

impl PatchClassifier for OracleClassifier {
    type Prepared = ();

    fn prepare(&self, _image: &RgbImage) {}

    fn classify(&self, _: &(), window: Rect) -> f64 {
        self.objects.iter().any(|p| window.contains_point(*p)) as u8 as f64
    }

    fn classify_occluded(&self, _: &(), window: Rect, mask: Rect) -> f64 {
        self.objects
            .iter()
            .any(|p| window.contains_point(*p) && !mask.contains_point(*p)) as u8 as f64
    }
}

/// Returns the same probability for everything.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantClassifier(pub f64);

impl PatchClassifier for ConstantClassifier {
    type Prepared = ();

    fn prepare(&self, _image: &RgbImage) {}

    fn classify(&self, _: &(), _window: Rect) -> f64 {
        self.0
    }

    fn classify_occluded(&self, _: &(), _window: Rect, _mask: Rect) -> f64 {
        self.0
    }
}
