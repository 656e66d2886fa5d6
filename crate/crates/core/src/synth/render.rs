use image::{Rgb, RgbImage};

use super::{mix_seed, Ellipse, ImageLayout};

const BACKGROUND: [f64; 3] = [236.0, 228.0, 238.0];
const NUCLEUS: [f64; 3] = [110.0, 120.0, 185.0];
const MITOSIS: [f64; 3] = [92.0, 52.0, 30.0];
const ARTIFACT: [f64; 3] = [175.0, 132.0, 92.0];

/// Per-pixel noise in `[-amp, amp]` for each channel, a pure function of the
/// seed and the pixel so paint order does not matter.
fn noisy(base: [f64; 3], amp: f64, seed: u64, x: u32, y: u32, layer: u64) -> Rgb<u8> {
    let h = mix_seed(seed, ((y as u64) << 32) | x as u64, layer);
    let mut out = [0u8; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let byte = (h >> (c * 16)) as u16 as f64 / u16::MAX as f64;
        *o = (base[c] + amp * (2.0 * byte - 1.0)).round().clamp(0.0, 255.0) as u8;
    }
    Rgb(out)
}

fn paint(img: &mut RgbImage, e: &Ellipse, color: [f64; 3], amp: f64, seed: u64, layer: u64) {
    let r = e.extent().ceil() + 1.0;
    let (w, h) = img.dimensions();
    let x0 = (e.center.x - r).floor().max(0.0) as u32;
    let y0 = (e.center.y - r).floor().max(0.0) as u32;
    let x1 = ((e.center.x + r).ceil().max(0.0) as u32).min(w);
    let y1 = ((e.center.y + r).ceil().max(0.0) as u32).min(h);
    for y in y0..y1 {
        for x in x0..x1 {
            if e.contains(x as f64 + 0.5, y as f64 + 0.5) {
                img.put_pixel(x, y, noisy(color, amp, seed, x, y, layer));
            }
        }
    }
}

/// Rasterize a layout. Deterministic in the layout alone.
pub fn render(layout: &ImageLayout) -> RgbImage {
    let seed = layout.noise_seed;
    let mut img = RgbImage::from_fn(layout.size.width, layout.size.height, |x, y| {
        noisy(BACKGROUND, 6.0, seed, x, y, 0)
    });
    for n in &layout.nuclei {
        paint(&mut img, n, NUCLEUS, 8.0, seed, 1);
    }
    for lobes in &layout.distractors {
        for lobe in lobes {
            paint(&mut img, lobe, ARTIFACT, 6.0, seed, 2);
        }
    }
    for m in &layout.mitoses {
        paint(&mut img, m, MITOSIS, 6.0, seed, 3);
    }
    img
}
