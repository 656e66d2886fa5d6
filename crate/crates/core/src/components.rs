//! Binary masks, 8-connected components and blob centroids.
//!
//! Masks are stored as sorted linear pixel indices, which keeps the mostly
//! empty 1600x1600 masks of the gaze pipeline cheap to build and scan.
//! Pixel `(i, j)` covers `[i, i+1) x [j, j+1)`; centroids are reported in the
//! same continuous coordinates, so a pixel's own centroid is `(i+0.5, j+0.5)`.

use crate::gaze::{ImagePoint, ImageSize};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    size: ImageSize,
    on: Vec<u32>,
}

impl Mask {
    pub fn empty(size: ImageSize) -> Self {
        Mask {
            size,
            on: Vec::new(),
        }
    }

    /// Build from linear indices (`y * width + x`). Duplicates are removed.
    pub fn from_indices(size: ImageSize, mut on: Vec<u32>) -> Self {
        on.sort_unstable();
        on.dedup();
        debug_assert!(on.last().is_none_or(|&i| (i as usize) < size.pixel_count()));
        Mask { size, on }
    }

    pub fn from_fn(size: ImageSize, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut on = Vec::new();
        for y in 0..size.height {
            for x in 0..size.width {
                if f(x, y) {
                    on.push(y * size.width + x);
                }
            }
        }
        Mask { size, on }
    }

    pub fn size(&self) -> ImageSize {
        self.size
    }

    pub fn area(&self) -> usize {
        self.on.len()
    }

    pub fn is_empty(&self) -> bool {
        self.on.is_empty()
    }

    pub fn indices(&self) -> &[u32] {
        &self.on
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x < self.size.width
            && y < self.size.height
            && self.on.binary_search(&(y * self.size.width + x)).is_ok()
    }

    /// Connected components in raster order of their first pixel.
    pub fn components(&self) -> Vec<Vec<u32>> {
        find_components(self.size, &self.on)
    }

    /// Drop components with fewer than `min_area` pixels.
    pub fn remove_small(&self, min_area: usize) -> Mask {
        let mut on: Vec<u32> = self
            .components()
            .into_iter()
            .filter(|c| c.len() >= min_area)
            .flatten()
            .collect();
        on.sort_unstable();
        Mask {
            size: self.size,
            on,
        }
    }
}

/// 8-connected components of a sorted set of on-pixels. Each component's
/// pixels are returned sorted.
pub fn find_components(size: ImageSize, on: &[u32]) -> Vec<Vec<u32>> {
    if on.is_empty() {
        return Vec::new();
    }
    let (w, h) = (size.width as i64, size.height as i64);
    // 0 = off, 1 = on and unvisited, 2 = visited. Zeroed allocation stays
    // lazily mapped away from the on-pixels.
    let mut state = vec![0u8; size.pixel_count()];
    for &i in on {
        state[i as usize] = 1;
    }
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for &seed in on {
        if state[seed as usize] != 1 {
            continue;
        }
        state[seed as usize] = 2;
        stack.push(seed);
        let mut comp = Vec::new();
        while let Some(p) = stack.pop() {
            comp.push(p);
            let (px, py) = (p as i64 % w, p as i64 / w);
            for dy in -1..=1 {
                let ny = py + dy;
                if ny < 0 || ny >= h {
                    continue;
                }
                for dx in -1..=1 {
                    let nx = px + dx;
                    if (dx == 0 && dy == 0) || nx < 0 || nx >= w {
                        continue;
                    }
                    let n = (ny * w + nx) as usize;
                    if state[n] == 1 {
                        state[n] = 2;
                        stack.push(n as u32);
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Summary of one connected component.
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub centroid: ImagePoint,
    pub area: usize,
    /// Largest weight inside the component (1 for unweighted blobs).
    pub peak: f64,
    /// Inclusive pixel bounding box `(x0, y0, x1, y1)`.
    pub bbox: (u32, u32, u32, u32),
}

/// Blob statistics for a component. With `weight`, the centroid is the
/// weight-averaged pixel center; otherwise (or if all weights are zero) it is
/// the plain mean.
pub fn blob(size: ImageSize, pixels: &[u32], weight: Option<&dyn Fn(u32) -> f64>) -> Blob {
    let w = size.width;
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    let (mut bx, mut by) = (0.0, 0.0);
    let mut peak = f64::NEG_INFINITY;
    let mut bbox = (u32::MAX, u32::MAX, 0, 0);
    for &p in pixels {
        let (x, y) = (p % w, p / w);
        bbox = (bbox.0.min(x), bbox.1.min(y), bbox.2.max(x), bbox.3.max(y));
        let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
        bx += cx;
        by += cy;
        let v = weight.map_or(1.0, |f| f(p));
        peak = peak.max(v);
        sx += v * cx;
        sy += v * cy;
        sw += v;
    }
    let n = pixels.len() as f64;
    let centroid = if weight.is_some() && sw > 0.0 {
        ImagePoint::new(sx / sw, sy / sw)
    } else {
        ImagePoint::new(bx / n, by / n)
    };
    Blob {
        centroid,
        area: pixels.len(),
        peak,
        bbox,
    }
}
