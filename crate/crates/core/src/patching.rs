//! Sliding-window patch extraction and overlap-averaged reconstruction.
//!
//! Windows are enumerated in row-major grid order and each `n x n` window is
//! vectorized row-major into one column of an `n² x Q` matrix.

use nalgebra::DMatrix;

use crate::error::{param_err, Result};
use crate::imagecore::{clamp_unit, GrayImage};

/// Layout of the sliding-window grid over an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGeometry {
    height: usize,
    width: usize,
    window: usize,
    step: usize,
    grid_rows: usize,
    grid_cols: usize,
}

impl PatchGeometry {
    pub fn new(height: usize, width: usize, window: usize, step: usize) -> Result<Self> {
        if window == 0 || step == 0 {
            return param_err("window and step must be positive");
        }
        if window > height || window > width {
            return param_err(format!("window {window} larger than image {height}x{width}"));
        }
        Ok(Self {
            height,
            width,
            window,
            step,
            grid_rows: (height - window) / step + 1,
            grid_cols: (width - window) / step + 1,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn grid_rows(&self) -> usize {
        self.grid_rows
    }

    pub fn grid_cols(&self) -> usize {
        self.grid_cols
    }

    /// Number of patches `Q`.
    pub fn count(&self) -> usize {
        self.grid_rows * self.grid_cols
    }

    /// Patch vector length `n²`.
    pub fn patch_len(&self) -> usize {
        self.window * self.window
    }

    pub fn grid_position(&self, column: usize) -> (usize, usize) {
        (column / self.grid_cols, column % self.grid_cols)
    }

    pub fn column_index(&self, grid_row: usize, grid_col: usize) -> usize {
        grid_row * self.grid_cols + grid_col
    }

    /// Top-left pixel of the window stored in `column`.
    pub fn origin(&self, column: usize) -> (usize, usize) {
        let (r, c) = self.grid_position(column);
        (r * self.step, c * self.step)
    }

    /// Extent of the region touched by at least one window.
    pub fn covered_extent(&self) -> (usize, usize) {
        ((self.grid_rows - 1) * self.step + self.window, (self.grid_cols - 1) * self.step + self.window)
    }
}

/// Patch vectors as columns, plus the geometry that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchMatrix {
    geometry: PatchGeometry,
    data: DMatrix<f64>,
}

impl PatchMatrix {
    pub fn new(geometry: PatchGeometry, data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() != geometry.patch_len() || data.ncols() != geometry.count() {
            return param_err(format!(
                "patch matrix is {}x{}, geometry expects {}x{}",
                data.nrows(),
                data.ncols(),
                geometry.patch_len(),
                geometry.count()
            ));
        }
        Ok(Self { geometry, data })
    }

    pub fn geometry(&self) -> &PatchGeometry {
        &self.geometry
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }
}

pub fn extract_patches(img: &GrayImage, window: usize, step: usize) -> Result<PatchMatrix> {
    let geom = PatchGeometry::new(img.height(), img.width(), window, step)?;
    let mut data = DMatrix::zeros(geom.patch_len(), geom.count());
    for (q, mut col) in data.column_iter_mut().enumerate() {
        let (r0, c0) = geom.origin(q);
        for i in 0..window {
            for j in 0..window {
                col[i * window + j] = img.get(r0 + i, c0 + j);
            }
        }
    }
    PatchMatrix::new(geom, data)
}

/// Per-pixel number of windows covering each pixel, row-major.
pub fn coverage_counts(geom: &PatchGeometry) -> Vec<usize> {
    let mut counts = vec![0usize; geom.height * geom.width];
    for q in 0..geom.count() {
        let (r0, c0) = geom.origin(q);
        for i in 0..geom.window {
            for j in 0..geom.window {
                counts[(r0 + i) * geom.width + c0 + j] += 1;
            }
        }
    }
    counts
}

/// Averages all overlapping patch entries back into an image.
///
/// Pixels covered by no window copy the nearest covered pixel. Sums are
/// accumulated in column order and divided once per pixel.
pub fn reconstruct_average(patches: &PatchMatrix) -> Result<GrayImage> {
    average_columns(patches.geometry(), patches.data())
}

pub(crate) fn average_columns(geom: &PatchGeometry, data: &DMatrix<f64>) -> Result<GrayImage> {
    if data.nrows() != geom.patch_len() || data.ncols() != geom.count() {
        return param_err("patch matrix does not match geometry");
    }
    let (h, w, n) = (geom.height, geom.width, geom.window);
    let mut sums = vec![0.0; h * w];
    let mut counts = vec![0u32; h * w];
    for (q, col) in data.column_iter().enumerate() {
        let (r0, c0) = geom.origin(q);
        for i in 0..n {
            let base = (r0 + i) * w + c0;
            for j in 0..n {
                sums[base + j] += col[i * n + j];
                counts[base + j] += 1;
            }
        }
    }
    let rows = nearest_covered(h, n, geom.step, geom.grid_rows);
    let cols = nearest_covered(w, n, geom.step, geom.grid_cols);
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let src = rows[r] * w + cols[c];
            out[r * w + c] = clamp_unit(sums[src] / counts[src] as f64);
        }
    }
    GrayImage::new(h, w, out)
}

/// For each index along one axis, the nearest index covered by some window
/// (ties resolve to the lower index). Covered pixels form a product of the
/// per-axis covered sets, so the nearest covered pixel is found per axis.
fn nearest_covered(len: usize, window: usize, step: usize, windows: usize) -> Vec<usize> {
    let mut covered = vec![false; len];
    for k in 0..windows {
        covered[k * step..k * step + window].iter_mut().for_each(|v| *v = true);
    }
    (0..len)
        .map(|i| (0..len).filter(|&j| covered[j]).min_by_key(|&j| (i.abs_diff(j), j)).expect("at least one window"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn test_image(h: usize, w: usize, seed: u64) -> GrayImage {
        GrayImage::from_fn(h, w, |r, c| {
            let x = (r as u64 * 7919 + c as u64 * 104729 + seed * 31337) % 1009;
            x as f64 / 1008.0
        })
        .unwrap()
    }

    #[test]
    fn patch_counts_follow_grid_formula() {
        let img = test_image(16, 16, 0);
        assert_eq!(extract_patches(&img, 8, 1).unwrap().data().ncols(), 81);
        let g = PatchGeometry::new(512, 512, 8, 1).unwrap();
        assert_eq!(g.count(), 255_025);
        let g = PatchGeometry::new(128, 128, 8, 4).unwrap();
        assert_eq!(g.count(), 961);
    }

    #[test]
    fn oversized_window_rejected() {
        let img = test_image(6, 10, 0);
        assert!(extract_patches(&img, 7, 1).is_err());
        assert!(extract_patches(&img, 4, 0).is_err());
    }

    #[test]
    fn single_window_is_whole_image() {
        let img = test_image(5, 5, 1);
        let p = extract_patches(&img, 5, 1).unwrap();
        assert_eq!(p.data().ncols(), 1);
        assert_eq!(p.data().column(0).as_slice(), img.data());
        assert_eq!(reconstruct_average(&p).unwrap(), img);
    }

    #[test]
    fn column_matches_block_at_origin() {
        let img = test_image(11, 13, 2);
        let p = extract_patches(&img, 4, 3).unwrap();
        let g = *p.geometry();
        let q = g.column_index(2, 1);
        assert_eq!(g.origin(q), (6, 3));
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(p.data()[(i * 4 + j, q)], img.get(6 + i, 3 + j));
            }
        }
    }

    #[test]
    fn disagreeing_overlap_is_averaged() {
        // 1x3 image, window 1 would not overlap; use 2x3 with window 2 step 1.
        let g = PatchGeometry::new(2, 3, 2, 1).unwrap();
        let a = 0.2;
        let b = 0.6;
        let data =
            DMatrix::from_columns(&[nalgebra::DVector::from_element(4, a), nalgebra::DVector::from_element(4, b)]);
        let img = reconstruct_average(&PatchMatrix::new(g, data).unwrap()).unwrap();
        assert!((img.get(0, 1) - (a + b) / 2.0).abs() < 1e-15);
        assert_eq!(img.get(0, 0), a);
        assert_eq!(img.get(1, 2), b);
    }

    #[test]
    fn uncovered_pixels_copy_nearest_covered() {
        let img = test_image(7, 7, 3);
        let p = extract_patches(&img, 4, 2).unwrap();
        // grid is 2x2, covered extent 6x6
        assert_eq!(p.geometry().covered_extent(), (6, 6));
        let out = reconstruct_average(&p).unwrap();
        assert_eq!(out.get(6, 6), out.get(5, 5));
        assert_eq!(out.get(6, 2), out.get(5, 2));
        assert_eq!(out.get(3, 6), out.get(3, 5));
    }

    #[test]
    fn gaps_between_sparse_windows_are_filled() {
        let img = test_image(5, 5, 4);
        let p = extract_patches(&img, 1, 2).unwrap();
        let out = reconstruct_average(&p).unwrap();
        // rows/cols 0, 2, 4 are covered; 1 and 3 copy the lower neighbour
        assert_eq!(out.get(1, 1), img.get(0, 0));
        assert_eq!(out.get(3, 2), img.get(2, 2));
        assert_eq!(out.get(4, 4), img.get(4, 4));
    }

    proptest! {
        #[test]
        fn roundtrip_on_covered_pixels(h in 4usize..24, w in 4usize..24, n in 1usize..6, s in 1usize..5, seed in 0u64..100) {
            prop_assume!(n <= h && n <= w);
            let img = test_image(h, w, seed);
            let p = extract_patches(&img, n, s).unwrap();
            let out = reconstruct_average(&p).unwrap();
            let counts = coverage_counts(p.geometry());
            for r in 0..h {
                for c in 0..w {
                    if counts[r * w + c] > 0 {
                        prop_assert!((out.get(r, c) - img.get(r, c)).abs() < 1e-12);
                    }
                }
            }
        }

        #[test]
        fn coverage_matches_brute_force(h in 1usize..21, w in 1usize..21, n in 1usize..8, s in 1usize..6) {
            prop_assume!(n <= h && n <= w);
            let g = PatchGeometry::new(h, w, n, s).unwrap();
            let counts = coverage_counts(&g);
            for r in 0..h {
                for c in 0..w {
                    let mut brute = 0;
                    let mut top = 0;
                    while top + n <= h {
                        let mut left = 0;
                        while left + n <= w {
                            if r >= top && r < top + n && c >= left && c < left + n {
                                brute += 1;
                            }
                            left += s;
                        }
                        top += s;
                    }
                    prop_assert_eq!(counts[r * w + c], brute);
                }
            }
        }

        #[test]
        fn column_grid_bijection(h in 1usize..30, w in 1usize..30, n in 1usize..6, s in 1usize..6) {
            prop_assume!(n <= h && n <= w);
            let g = PatchGeometry::new(h, w, n, s).unwrap();
            for q in 0..g.count() {
                let (r, c) = g.grid_position(q);
                prop_assert!(r < g.grid_rows() && c < g.grid_cols());
                prop_assert_eq!(g.column_index(r, c), q);
            }
        }
    }
}
