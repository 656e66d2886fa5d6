//! Display transforms. An image of size `w x h` is rotated first, then
//! flipped within the rotated frame:
//!
//! ```text
//! rot90:  (x, y) -> (y, w - x)        rot180: (x, y) -> (w - x, h - y)
//! rot270: (x, y) -> (h - y, x)
//! horizontal flip: (x, y) -> (W - x, y)   vertical flip: (x, y) -> (x, H - y)
//! ```
//!
//! where `W x H` is the displayed (rotated) size. The inverse undoes the flip
//! and then rotates by `360 - θ` in the displayed frame. Coordinates stay
//! continuous throughout so round trips are exact up to rounding.

use super::{DisplayRecord, Flip, GazePoint, ImagePoint, Rotation};
use crate::{Error, Result};

fn rotate(x: f64, y: f64, rotation: Rotation, w: f64, h: f64) -> (f64, f64) {
    match rotation {
        Rotation::R0 => (x, y),
        Rotation::R90 => (y, w - x),
        Rotation::R180 => (w - x, h - y),
        Rotation::R270 => (h - y, x),
    }
}

fn flip(x: f64, y: f64, flip: Flip, w: f64, h: f64) -> (f64, f64) {
    match flip {
        Flip::None => (x, y),
        Flip::Horizontal => (w - x, y),
        Flip::Vertical => (x, h - y),
    }
}

impl DisplayRecord {
    /// Width and height of the image as displayed (before viewport scaling).
    pub fn displayed_size(&self) -> (f64, f64) {
        let (w, h) = (
            self.image_size.width as f64,
            self.image_size.height as f64,
        );
        if self.rotation.swaps_axes() {
            (h, w)
        } else {
            (w, h)
        }
    }

    pub fn image_to_displayed(&self, p: ImagePoint) -> (f64, f64) {
        let (w, h) = (
            self.image_size.width as f64,
            self.image_size.height as f64,
        );
        let (dw, dh) = self.displayed_size();
        let (x, y) = rotate(p.x, p.y, self.rotation, w, h);
        flip(x, y, self.flip, dw, dh)
    }

    pub fn displayed_to_image(&self, u: f64, v: f64) -> ImagePoint {
        let (dw, dh) = self.displayed_size();
        let (x, y) = flip(u, v, self.flip, dw, dh);
        let (x, y) = rotate(x, y, self.rotation.inverse(), dw, dh);
        ImagePoint::new(x, y)
    }

    pub fn image_to_screen(&self, p: ImagePoint) -> (f64, f64) {
        let (u, v) = self.image_to_displayed(p);
        let vp = &self.viewport;
        (vp.origin_x + vp.scale * u, vp.origin_y + vp.scale * v)
    }

    pub fn screen_to_image(&self, screen_x: f64, screen_y: f64) -> Result<ImagePoint> {
        let vp = &self.viewport;
        if vp.scale.is_nan() || vp.scale <= 0.0 {
            return Err(Error::invalid(format!(
                "viewport scale must be positive, got {}",
                vp.scale
            )));
        }
        let u = (screen_x - vp.origin_x) / vp.scale;
        let v = (screen_y - vp.origin_y) / vp.scale;
        Ok(self.displayed_to_image(u, v))
    }
}

/// Map a gaze sample from screen to image coordinates. The result may lie
/// off the image; check it with [`super::ImageSize::contains`].
pub fn project_to_image(p: &GazePoint, display: &DisplayRecord) -> Result<ImagePoint> {
    let (sx, sy) = p
        .screen_position()
        .ok_or_else(|| Error::invalid("cannot project an invalid gaze sample"))?;
    display.screen_to_image(sx, sy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::{ImageSize, Viewport};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn record(rotation: Rotation, flip: Flip, size: ImageSize) -> DisplayRecord {
        DisplayRecord {
            rotation,
            flip,
            ..DisplayRecord::identity("img", size)
        }
    }

    #[test]
    fn identity_projection() {
        let d = record(Rotation::R0, Flip::None, ImageSize::square(1600));
        let p = project_to_image(&GazePoint::new(0.0, 800.0, 800.0, 1.0), &d).unwrap();
        assert_eq!(p, ImagePoint::new(800.0, 800.0));
    }

    #[test]
    fn rot90_forward_and_inverse() {
        let d = record(Rotation::R90, Flip::None, ImageSize::square(1600));
        assert_eq!(d.image_to_displayed(ImagePoint::new(100.0, 200.0)), (200.0, 1500.0));
        let p = project_to_image(&GazePoint::new(0.0, 200.0, 1500.0, 1.0), &d).unwrap();
        assert_eq!(p, ImagePoint::new(100.0, 200.0));
    }

    #[test]
    fn horizontal_flip_edge_is_off_image() {
        let size = ImageSize::square(1600);
        let d = record(Rotation::R0, Flip::Horizontal, size);
        let p = project_to_image(&GazePoint::new(0.0, 0.0, 10.0, 1.0), &d).unwrap();
        assert_eq!(p, ImagePoint::new(1600.0, 10.0));
        assert!(!size.contains(p));
    }

    #[test]
    fn zero_scale_is_an_error() {
        let mut d = record(Rotation::R0, Flip::None, ImageSize::square(10));
        d.viewport.scale = 0.0;
        assert!(project_to_image(&GazePoint::new(0.0, 1.0, 1.0, 1.0), &d).is_err());
    }

    #[test]
    fn non_square_rotation_swaps_dimensions() {
        let size = ImageSize::new(300, 100);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for rotation in Rotation::ALL {
            for fl in Flip::ALL {
                let d = DisplayRecord {
                    viewport: Viewport {
                        origin_x: 37.5,
                        origin_y: -12.0,
                        scale: 1.7,
                    },
                    ..record(rotation, fl, size)
                };
                let (dw, dh) = d.displayed_size();
                for _ in 0..200 {
                    let p = ImagePoint::new(rng.random_range(0.0..300.0), rng.random_range(0.0..100.0));
                    let (u, v) = d.image_to_displayed(p);
                    assert!((0.0..=dw).contains(&u) && (0.0..=dh).contains(&v));
                    let (sx, sy) = d.image_to_screen(p);
                    let back = d.screen_to_image(sx, sy).unwrap();
                    assert!(back.distance(&p) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn twelve_combinations_form_eight_distinct_maps() {
        let size = ImageSize::square(1600);
        let probes = [ImagePoint::new(100.0, 200.0), ImagePoint::new(700.0, 50.0)];
        let mut images: Vec<Vec<(i64, i64)>> = Vec::new();
        for rotation in Rotation::ALL {
            for fl in Flip::ALL {
                let d = record(rotation, fl, size);
                let img = probes
                    .iter()
                    .map(|p| {
                        let (u, v) = d.image_to_displayed(*p);
                        (u as i64, v as i64)
                    })
                    .collect();
                if !images.contains(&img) {
                    images.push(img);
                }
            }
        }
        assert_eq!(images.len(), 8);
    }
}
