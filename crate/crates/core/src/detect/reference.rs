use image::RgbImage;

use super::classifier::PatchClassifier;
use super::train::Trainable;
use super::Rect;
use crate::gaze::ImageSize;
use crate::heuristic::rgb_to_hsv;
use crate::{Error, Result};

/// Histogram bins: 8 hue × 8 saturation × 8 value.
pub const N_BINS: usize = 512;

const HEADER: &str = "gazelabel-reference-classifier v1";

/// Histogram bin of one pixel, `hue * 64 + sat * 8 + val`.
pub fn hsv_bin(rgb: [u8; 3]) -> u16 {
    let (h, s, v) = rgb_to_hsv(rgb[0], rgb[1], rgb[2]);
    let q = |x: f64| ((x * 8.0) as usize).min(7) as u16;
    q(h / 360.0) * 64 + q(s) * 8 + q(v)
}

/// Per-pixel histogram bins of an image.
#[derive(Debug, Clone, PartialEq)]
pub struct HsvBinMap {
    size: ImageSize,
    bins: Vec<u16>,
}

impl HsvBinMap {
    pub fn from_image(image: &RgbImage) -> Self {
        HsvBinMap {
            size: ImageSize::new(image.width(), image.height()),
            bins: image.pixels().map(|p| hsv_bin(p.0)).collect(),
        }
    }

    pub fn size(&self) -> ImageSize {
        self.size
    }

    pub fn get(&self, x: u32, y: u32) -> u16 {
        self.bins[y as usize * self.size.width as usize + x as usize]
    }

    pub fn counts(&self, window: Rect) -> Vec<u32> {
        let mut counts = vec![0u32; N_BINS];
        let w = self.size.width as usize;
        for y in window.y..window.bottom() {
            let row = &self.bins[y as usize * w..][window.x as usize..window.right() as usize];
            for &b in row {
                counts[b as usize] += 1;
            }
        }
        counts
    }

    /// L1-normalized histogram of `window`.
    pub fn histogram(&self, window: Rect) -> Vec<f64> {
        let n = window.area().max(1) as f64;
        self.counts(window).into_iter().map(|c| c as f64 / n).collect()
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic regression on a window's color histogram.
///
/// The score of a window is the mean, over its pixels, of the weight of each
/// pixel's bin, which equals `w · histogram`. Preparing an image builds an
/// integral image of per-pixel weights so any window or occluded window
/// scores in constant time.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceClassifier {
    weights: Vec<f64>,
    bias: f64,
    // AdaGrad accumulators. Training state only, not serialized.
    grad_sq: Vec<f64>,
    bias_grad_sq: f64,
}

impl Default for ReferenceClassifier {
    fn default() -> Self {
        ReferenceClassifier::new(vec![0.0; N_BINS], 0.0).expect("zero weights are valid")
    }
}

pub struct ReferencePrepared {
    bins: HsvBinMap,
    // (w + 1) × (h + 1) prefix sums of the weight of each pixel's bin.
    integral: Vec<f64>,
}

impl ReferencePrepared {
    pub fn bins(&self) -> &HsvBinMap {
        &self.bins
    }

    fn sum(&self, r: Rect) -> f64 {
        let stride = self.bins.size.width as usize + 1;
        let at = |x: u32, y: u32| self.integral[y as usize * stride + x as usize];
        at(r.right(), r.bottom()) - at(r.x, r.bottom()) - at(r.right(), r.y) + at(r.x, r.y)
    }
}

impl ReferenceClassifier {
    pub fn new(weights: Vec<f64>, bias: f64) -> Result<Self> {
        if weights.len() != N_BINS {
            return Err(Error::invalid(format!(
                "expected {N_BINS} weights, got {}",
                weights.len()
            )));
        }
        if !(bias.is_finite() && weights.iter().all(|w| w.is_finite())) {
            return Err(Error::invalid("classifier weights must be finite"));
        }
        Ok(ReferenceClassifier {
            weights,
            bias,
            grad_sq: vec![0.0; N_BINS],
            bias_grad_sq: 0.0,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn predict(&self, histogram: &[f64]) -> f64 {
        logistic(self.logit(histogram))
    }

    fn logit(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, x)| w * x).sum::<f64>()
    }

    /// Log-loss of one example plus `l2 / 2 * |w|²`.
    pub fn log_loss(&self, x: &[f64], label: bool, l2: f64) -> f64 {
        let z = self.logit(x);
        // log(1 + e^z) - y z, computed without overflow.
        let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
        let y = label as u8 as f64;
        softplus - y * z + 0.5 * l2 * self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Gradient of [`log_loss`](Self::log_loss) with respect to the weights
    /// and the bias.
    pub fn gradient(&self, x: &[f64], label: bool, l2: f64) -> (Vec<f64>, f64) {
        let r = self.predict(x) - label as u8 as f64;
        let gw = self
            .weights
            .iter()
            .zip(x)
            .map(|(w, x)| r * x + l2 * w)
            .collect();
        (gw, r)
    }

    /// Text form: a header line, then 512 weights and the bias, one per line.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(24 * (N_BINS + 2));
        s.push_str(HEADER);
        s.push('\n');
        for w in self.weights.iter().chain(std::iter::once(&self.bias)) {
            s.push_str(&format!("{w:?}\n"));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == HEADER => {}
            other => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header {HEADER:?}, found {other:?}"),
                })
            }
        }
        let values = lines
            .enumerate()
            .map(|(i, l)| {
                l.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 2,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != N_BINS + 1 {
            return Err(Error::invalid(format!(
                "expected {} numbers, found {}",
                N_BINS + 1,
                values.len()
            )));
        }
        ReferenceClassifier::new(values[..N_BINS].to_vec(), values[N_BINS])
    }

    fn modal_bin(&self, prepared: &ReferencePrepared, window: Rect) -> usize {
        let counts = prepared.bins.counts(window);
        (0..N_BINS).max_by_key(|&b| (counts[b], std::cmp::Reverse(b))).unwrap_or(0)
    }

    fn occluded_with_fill(&self, prepared: &ReferencePrepared, window: Rect, mask: Rect, fill: usize) -> f64 {
        let area = window.area() as f64;
        let mut sum = prepared.sum(window);
        if let Some(hidden) = window.intersect(&mask) {
            sum += hidden.area() as f64 * self.weights[fill] - prepared.sum(hidden);
        }
        logistic(self.bias + sum / area)
    }
}

impl PatchClassifier for ReferenceClassifier {
    type Prepared = ReferencePrepared;

    fn prepare(&self, image: &RgbImage) -> ReferencePrepared {
        let bins = HsvBinMap::from_image(image);
        let (w, h) = (bins.size.width as usize, bins.size.height as usize);
        let stride = w + 1;
        let mut integral = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += self.weights[bins.bins[y * w + x] as usize];
                integral[(y + 1) * stride + x + 1] = integral[y * stride + x + 1] + row;
            }
        }
        ReferencePrepared { bins, integral }
    }

    fn classify(&self, prepared: &ReferencePrepared, window: Rect) -> f64 {
        logistic(self.bias + prepared.sum(window) / window.area().max(1) as f64)
    }

    /// Hidden pixels are treated as the window's most common color bin.
    fn classify_occluded(&self, prepared: &ReferencePrepared, window: Rect, mask: Rect) -> f64 {
        let fill = self.modal_bin(prepared, window);
        self.occluded_with_fill(prepared, window, mask, fill)
    }

    fn classify_occlusions(&self, prepared: &ReferencePrepared, window: Rect, masks: &[Rect]) -> Vec<f64> {
        let fill = self.modal_bin(prepared, window);
        masks
            .iter()
            .map(|m| self.occluded_with_fill(prepared, window, *m, fill))
            .collect()
    }
}

impl Trainable for ReferenceClassifier {
    type Features = Vec<f64>;

    fn features(&self, prepared: &ReferencePrepared, window: Rect) -> Vec<f64> {
        prepared.bins.histogram(window)
    }

    fn predict_features(&self, features: &Vec<f64>) -> f64 {
        self.predict(features)
    }

    /// One AdaGrad step on the regularized log-loss.
    fn sgd_step(&mut self, features: &Vec<f64>, label: bool, learning_rate: f64, l2: f64) {
        const EPS: f64 = 1e-8;
        let (gw, gb) = self.gradient(features, label, l2);
        for ((w, acc), g) in self.weights.iter_mut().zip(&mut self.grad_sq).zip(gw) {
            if g != 0.0 {
                *acc += g * g;
                *w -= learning_rate * g / (acc.sqrt() + EPS);
            }
        }
        self.bias_grad_sq += gb * gb;
        self.bias -= learning_rate * gb / (self.bias_grad_sq.sqrt() + EPS);
    }
}
