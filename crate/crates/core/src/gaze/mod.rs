//! Gaze samples, display records and screen-to-image projection.

mod log;
mod transform;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use log::{
    parse_display_log, parse_gaze_log, write_display_log, write_gaze_log, DisplayIndex, GazeLog,
};
pub use transform::project_to_image;

/// Default minimum tracker confidence for a sample to be used.
pub const DEFAULT_CONFIDENCE_MIN: f64 = 0.5;

/// One tracker sample. Coordinates and confidence are `None` when the
/// tracker reported `N/A`.
#[derive(Debug, Clone, PartialEq)]
pub struct GazePoint {
    /// Milliseconds since image onset.
    pub t_ms: f64,
    pub screen_x: Option<f64>,
    pub screen_y: Option<f64>,
    pub confidence: Option<f64>,
    pub valid: bool,
}

impl GazePoint {
    pub fn new(t_ms: f64, screen_x: f64, screen_y: f64, confidence: f64) -> Self {
        GazePoint {
            t_ms,
            screen_x: Some(screen_x),
            screen_y: Some(screen_y),
            confidence: Some(confidence),
            valid: true,
        }
    }

    pub fn invalid(t_ms: f64) -> Self {
        GazePoint {
            t_ms,
            screen_x: None,
            screen_y: None,
            confidence: None,
            valid: false,
        }
    }

    /// Screen position, or `None` for samples flagged invalid or missing a
    /// coordinate.
    pub fn screen_position(&self) -> Option<(f64, f64)> {
        if !self.valid {
            return None;
        }
        Some((self.screen_x?, self.screen_y?))
    }

    /// Valid, fully specified and at least `confidence_min` confident.
    pub fn is_usable(&self, confidence_min: f64) -> bool {
        self.screen_position().is_some()
            && self
                .confidence
                .is_some_and(|c| (0.0..=1.0).contains(&c) && c >= confidence_min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Rotation {
    #[default]
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub const ALL: [Rotation; 4] = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270];

    pub fn degrees(self) -> u32 {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 90,
            Rotation::R180 => 180,
            Rotation::R270 => 270,
        }
    }

    pub fn from_degrees(deg: i64) -> Result<Self> {
        match deg.rem_euclid(360) {
            0 => Ok(Rotation::R0),
            90 => Ok(Rotation::R90),
            180 => Ok(Rotation::R180),
            270 => Ok(Rotation::R270),
            _ => Err(Error::invalid(format!(
                "rotation must be one of 0, 90, 180, 270 degrees, got {deg}"
            ))),
        }
    }

    pub fn inverse(self) -> Self {
        match self {
            Rotation::R0 => Rotation::R0,
            Rotation::R90 => Rotation::R270,
            Rotation::R180 => Rotation::R180,
            Rotation::R270 => Rotation::R90,
        }
    }

    /// Whether the displayed image has width and height swapped.
    pub fn swaps_axes(self) -> bool {
        matches!(self, Rotation::R90 | Rotation::R270)
    }
}

impl Serialize for Rotation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u32(self.degrees())
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let deg = i64::deserialize(d)?;
        Rotation::from_degrees(deg).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flip {
    #[default]
    None,
    Horizontal,
    Vertical,
}

impl Flip {
    pub const ALL: [Flip; 3] = [Flip::None, Flip::Horizontal, Flip::Vertical];
}

/// Placement of the displayed image on screen: `screen = origin + scale * displayed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewport {
    pub origin_x: f64,
    pub origin_y: f64,
    /// Screen pixels per image pixel.
    pub scale: f64,
}

impl Default for Viewport {
    fn default() -> Self {
        Viewport {
            origin_x: 0.0,
            origin_y: 0.0,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

impl ImageSize {
    pub const fn new(width: u32, height: u32) -> Self {
        ImageSize { width, height }
    }

    pub const fn square(side: u32) -> Self {
        ImageSize {
            width: side,
            height: side,
        }
    }

    /// Half-open containment: `0 <= x < width` and `0 <= y < height`.
    pub fn contains(&self, p: ImagePoint) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x < self.width as f64 && p.y < self.height as f64
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// A continuous position in image pixels, origin at the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImagePoint {
    pub x: f64,
    pub y: f64,
}

impl ImagePoint {
    pub const fn new(x: f64, y: f64) -> Self {
        ImagePoint { x, y }
    }

    pub fn distance(&self, other: &ImagePoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// How one image was shown to one participant.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplayRecord {
    /// `None` applies the record to every participant who saw the image.
    pub participant_id: Option<String>,
    pub image_id: String,
    pub rotation: Rotation,
    pub flip: Flip,
    pub viewport: Viewport,
    pub image_size: ImageSize,
}

impl DisplayRecord {
    pub fn identity(image_id: impl Into<String>, image_size: ImageSize) -> Self {
        DisplayRecord {
            participant_id: None,
            image_id: image_id.into(),
            rotation: Rotation::R0,
            flip: Flip::None,
            viewport: Viewport::default(),
            image_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.viewport.scale > 0.0 && self.viewport.scale.is_finite()) {
            return Err(Error::invalid(format!(
                "viewport scale must be positive, got {}",
                self.viewport.scale
            )));
        }
        if !(self.viewport.origin_x.is_finite() && self.viewport.origin_y.is_finite()) {
            return Err(Error::invalid("viewport origin must be finite"));
        }
        if self.image_size.width == 0 || self.image_size.height == 0 {
            return Err(Error::invalid("image size must be positive"));
        }
        Ok(())
    }
}

/// One participant's samples for one displayed image, in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeSequence {
    pub participant_id: String,
    pub image_id: String,
    pub points: Vec<GazePoint>,
    pub display: DisplayRecord,
}

impl GazeSequence {
    /// Image-space positions of the usable samples that land on the image.
    pub fn project(&self, confidence_min: f64) -> Vec<ImagePoint> {
        if self.display.validate().is_err() {
            return Vec::new();
        }
        self.points
            .iter()
            .filter(|p| p.is_usable(confidence_min))
            .filter_map(|p| project_to_image(p, &self.display).ok())
            .filter(|ip| self.display.image_size.contains(*ip))
            .collect()
    }
}

/// Keep the samples that are valid, at least `confidence_min` confident, and
/// project onto the image. Order is preserved.
pub fn filter_points(seq: &GazeSequence, confidence_min: f64) -> GazeSequence {
    let display_ok = seq.display.validate().is_ok();
    let points = seq
        .points
        .iter()
        .filter(|p| display_ok && p.is_usable(confidence_min))
        .filter(|p| {
            project_to_image(p, &seq.display)
                .map(|ip| seq.display.image_size.contains(ip))
                .unwrap_or(false)
        })
        .cloned()
        .collect();
    GazeSequence {
        participant_id: seq.participant_id.clone(),
        image_id: seq.image_id.clone(),
        points,
        display: seq.display.clone(),
    }
}
