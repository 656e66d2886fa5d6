use crate::gaze::{ImagePoint, ImageSize};
use crate::{Error, Result};

use super::DistillParams;

const TILE: usize = 32;

/// Gaze density on a one-cell-per-pixel grid. Every accumulated point
/// contributes exactly unit mass.
///
/// Only tiles that received a deposit are ever written or scanned; the rest
/// of the grid stays zero.
#[derive(Debug, Clone)]
pub struct GazeHeatmap {
    size: ImageSize,
    grid: Vec<f64>,
    tiles_x: usize,
    touched: Vec<bool>,
    n_points: usize,
    k: usize,
}

impl GazeHeatmap {
    pub fn zeros(size: ImageSize, k: usize) -> Self {
        let tiles_x = (size.width as usize).div_ceil(TILE);
        let tiles_y = (size.height as usize).div_ceil(TILE);
        GazeHeatmap {
            size,
            grid: vec![0.0; size.pixel_count()],
            tiles_x,
            touched: vec![false; tiles_x * tiles_y],
            n_points: 0,
            k,
        }
    }

    pub fn size(&self) -> ImageSize {
        self.size
    }

    /// Number of observers pooled into the map.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.grid[y as usize * self.size.width as usize + x as usize]
    }

    pub(crate) fn at_index(&self, i: u32) -> f64 {
        self.grid[i as usize]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.grid
    }

    pub fn total_mass(&self) -> f64 {
        let mut total = 0.0;
        self.for_each_touched_row(|_, row| total += row.iter().sum::<f64>());
        total
    }

    pub fn max(&self) -> f64 {
        let mut m = 0.0f64;
        self.for_each_touched_row(|_, row| {
            m = row.iter().copied().fold(m, f64::max);
        });
        m
    }

    /// Linear indices of cells with `value >= cutoff` and `value > 0`, in
    /// raster order.
    pub(crate) fn indices_at_least(&self, cutoff: f64) -> Vec<u32> {
        let mut out = Vec::new();
        self.for_each_touched_row(|start, row| {
            for (i, &v) in row.iter().enumerate() {
                if v > 0.0 && v >= cutoff {
                    out.push((start + i) as u32);
                }
            }
        });
        out
    }

    /// Visit the touched part of every grid row in raster order, passing the
    /// linear index of the first cell and the cells.
    fn for_each_touched_row(&self, mut f: impl FnMut(usize, &[f64])) {
        let (w, h) = (self.size.width as usize, self.size.height as usize);
        for y in 0..h {
            let ty = y / TILE;
            for tx in 0..self.tiles_x {
                if self.touched[ty * self.tiles_x + tx] {
                    let x0 = tx * TILE;
                    let x1 = (x0 + TILE).min(w);
                    let start = y * w + x0;
                    f(start, &self.grid[start..y * w + x1]);
                }
            }
        }
    }

    fn mark(&mut self, x0: usize, x1: usize, y0: usize, y1: usize) {
        for ty in y0 / TILE..=y1 / TILE {
            for tx in x0 / TILE..=x1 / TILE {
                self.touched[ty * self.tiles_x + tx] = true;
            }
        }
    }

    /// Add one unit-mass Gaussian centred on `p`, sampled at pixel centres,
    /// truncated to a disk of `radius` and to the image, then renormalized.
    fn deposit(&mut self, p: ImagePoint, sigma: f64, radius: f64) {
        let (w, h) = (self.size.width as i64, self.size.height as i64);
        let y_lo = ((p.y - radius - 0.5).ceil() as i64).max(0);
        let y_hi = ((p.y + radius - 0.5).floor() as i64).min(h - 1);
        let x_lo = ((p.x - radius - 0.5).ceil() as i64).max(0);
        let x_hi = ((p.x + radius - 0.5).floor() as i64).min(w - 1);
        if y_lo > y_hi || x_lo > x_hi {
            self.deposit_cell(p);
            return;
        }
        let inv = 1.0 / (2.0 * sigma * sigma);
        let gx: Vec<f64> = (x_lo..=x_hi)
            .map(|i| {
                let d = i as f64 + 0.5 - p.x;
                (-d * d * inv).exp()
            })
            .collect();
        let mut prefix = Vec::with_capacity(gx.len() + 1);
        prefix.push(0.0);
        for g in &gx {
            prefix.push(prefix.last().unwrap() + g);
        }

        let r2 = radius * radius;
        let mut rows = Vec::with_capacity((y_hi - y_lo + 1) as usize);
        let mut norm = 0.0;
        for j in y_lo..=y_hi {
            let dy = j as f64 + 0.5 - p.y;
            let rem = r2 - dy * dy;
            if rem < 0.0 {
                continue;
            }
            let half = rem.sqrt();
            let a = ((p.x - half - 0.5).ceil() as i64).max(x_lo);
            let b = ((p.x + half - 0.5).floor() as i64).min(x_hi);
            if a > b {
                continue;
            }
            let gy = (-dy * dy * inv).exp();
            let (ia, ib) = ((a - x_lo) as usize, (b - x_lo) as usize);
            norm += gy * (prefix[ib + 1] - prefix[ia]);
            rows.push((j as usize, ia, ib, gy));
        }
        if norm.is_nan() || norm <= 0.0 {
            self.deposit_cell(p);
            return;
        }
        let wu = w as usize;
        let (mut mx0, mut mx1) = (usize::MAX, 0);
        for &(j, ia, ib, gy) in &rows {
            let scale = gy / norm;
            let base = j * wu + x_lo as usize;
            for (cell, g) in self.grid[base + ia..=base + ib].iter_mut().zip(&gx[ia..=ib]) {
                *cell += g * scale;
            }
            mx0 = mx0.min(x_lo as usize + ia);
            mx1 = mx1.max(x_lo as usize + ib);
        }
        let (y0, y1) = (rows[0].0, rows[rows.len() - 1].0);
        self.mark(mx0, mx1, y0, y1);
    }

    fn deposit_cell(&mut self, p: ImagePoint) {
        let x = (p.x.floor() as i64).clamp(0, self.size.width as i64 - 1) as usize;
        let y = (p.y.floor() as i64).clamp(0, self.size.height as i64 - 1) as usize;
        self.grid[y * self.size.width as usize + x] += 1.0;
        self.mark(x, x, y, y);
    }
}

/// Sum of unit-mass truncated Gaussians, one per point. Points must lie on
/// the image.
pub fn accumulate_heatmap(
    points: &[ImagePoint],
    size: ImageSize,
    params: &DistillParams,
    k: usize,
) -> Result<GazeHeatmap> {
    params.validate()?;
    if k == 0 {
        return Err(Error::invalid("group size k must be at least 1"));
    }
    if let Some(p) = points.iter().find(|p| !size.contains(**p)) {
        return Err(Error::invalid(format!(
            "point ({}, {}) lies off the {}x{} image",
            p.x, p.y, size.width, size.height
        )));
    }
    let mut map = GazeHeatmap::zeros(size, k);
    for &p in points {
        map.deposit(p, params.sigma, params.truncation_radius);
    }
    map.n_points = points.len();
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params(sigma: f64) -> DistillParams {
        DistillParams {
            sigma,
            truncation_radius: 3.0 * sigma,
            ..DistillParams::default()
        }
    }

    #[test]
    fn empty_points_give_zero_field() {
        let map = accumulate_heatmap(&[], ImageSize::square(64), &params(10.0), 1).unwrap();
        assert_eq!(map.total_mass(), 0.0);
        assert!(map.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_point_normalization_and_peak() {
        let size = ImageSize::square(400);
        let map =
            accumulate_heatmap(&[ImagePoint::new(100.5, 100.5)], size, &params(10.0), 1).unwrap();
        assert!((map.total_mass() - 1.0).abs() < 1e-6);
        let analytic = 1.0 / (2.0 * PI * 100.0);
        let peak = map.get(100, 100);
        assert_eq!(peak, map.max());
        // Truncation at 3 sigma removes ~1.1% of the mass; renormalizing
        // raises the peak by the same factor.
        assert!(peak > analytic && peak < analytic * 1.02, "{peak} vs {analytic}");
    }

    #[test]
    fn coincident_points_double_the_field() {
        let size = ImageSize::square(200);
        let p = ImagePoint::new(57.3, 80.9);
        let one = accumulate_heatmap(&[p], size, &params(10.0), 1).unwrap();
        let two = accumulate_heatmap(&[p, p], size, &params(10.0), 1).unwrap();
        for (a, b) in one.as_slice().iter().zip(two.as_slice()) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn border_points_keep_unit_mass() {
        let size = ImageSize::new(120, 90);
        let pts = [
            ImagePoint::new(0.0, 0.0),
            ImagePoint::new(119.99, 89.99),
            ImagePoint::new(0.2, 45.0),
        ];
        let map = accumulate_heatmap(&pts, size, &params(10.0), 2).unwrap();
        assert!((map.total_mass() - 3.0).abs() < 1e-9);
        assert_eq!(map.n_points(), 3);
    }

    #[test]
    fn tiny_kernel_falls_back_to_cell() {
        let p = DistillParams {
            sigma: 0.1,
            truncation_radius: 0.2,
            ..DistillParams::default()
        };
        let map = accumulate_heatmap(&[ImagePoint::new(3.0, 3.0)], ImageSize::square(8), &p, 1)
            .unwrap();
        assert!((map.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_off_image_points_and_zero_k() {
        let size = ImageSize::square(10);
        assert!(accumulate_heatmap(&[ImagePoint::new(10.0, 1.0)], size, &params(1.0), 1).is_err());
        assert!(accumulate_heatmap(&[], size, &params(1.0), 0).is_err());
    }
}
