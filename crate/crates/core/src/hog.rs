//! Per-patch orientation histograms and dominant-orientation classes.
//!
//! Each patch is treated as a single HOG cell: central-difference gradients
//! with replicate edges, unsigned orientation in `[0°, 180°)`, hard binning
//! and no block normalization.

use nalgebra::DMatrix;

use crate::error::{param_err, Result};
use crate::patching::PatchMatrix;

/// Default dominance threshold `T`.
pub const DEFAULT_THRESHOLD: f64 = 0.3;

/// Accumulated gradient magnitude per orientation bin.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationHistogram(Vec<f64>);

impl OrientationHistogram {
    pub fn from_bins(bins: Vec<f64>) -> Result<Self> {
        if bins.is_empty() {
            return param_err("histogram needs at least one bin");
        }
        if bins.iter().any(|v| !(*v >= 0.0)) {
            return param_err("histogram bins must be non-negative");
        }
        Ok(Self(bins))
    }

    pub fn bins(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Class `0` means no dominant orientation; `1..=L` names the dominant bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PatchClassLabel(pub usize);

/// Bin index (0-based) for an unsigned orientation in degrees.
#[inline]
pub fn orientation_bin(degrees: f64, bins: usize) -> usize {
    let b = (degrees * bins as f64 / 180.0).floor() as usize;
    b.min(bins - 1)
}

/// Folds `atan2(gy, gx)` into `[0, 180)` degrees.
#[inline]
pub fn unsigned_orientation(gx: f64, gy: f64) -> f64 {
    let mut deg = gy.atan2(gx).to_degrees();
    if deg < 0.0 {
        deg += 180.0;
    }
    if deg >= 180.0 {
        deg -= 180.0;
    }
    deg
}

/// Central-difference gradients `(gx, gy)` of a row-major `n x n` patch,
/// replicating edge pixels. `gy` points down the rows.
pub fn patch_gradients(patch: &[f64], n: usize) -> Vec<(f64, f64)> {
    let at = |r: usize, c: usize| patch[r * n + c];
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        let (up, down) = (r.saturating_sub(1), (r + 1).min(n - 1));
        for c in 0..n {
            let (left, right) = (c.saturating_sub(1), (c + 1).min(n - 1));
            out.push((at(r, right) - at(r, left), at(down, c) - at(up, c)));
        }
    }
    out
}

pub fn orientation_histogram(patch: &[f64], n: usize, bins: usize) -> Result<OrientationHistogram> {
    if patch.len() != n * n {
        return param_err(format!("patch length {} is not {n}²", patch.len()));
    }
    if bins == 0 {
        return param_err("bin count must be at least 1");
    }
    Ok(OrientationHistogram(histogram_unchecked(patch, n, bins)))
}

fn histogram_unchecked(patch: &[f64], n: usize, bins: usize) -> Vec<f64> {
    let mut hist = vec![0.0; bins];
    for (gx, gy) in patch_gradients(patch, n) {
        let mag = (gx * gx + gy * gy).sqrt();
        if mag > 0.0 {
            hist[orientation_bin(unsigned_orientation(gx, gy), bins)] += mag;
        }
    }
    hist
}

/// Dominant-orientation rule: class 0 if the histogram is empty or
/// `max / sum < threshold`, otherwise the 1-based index of the first
/// maximal bin.
pub fn classify_patch(hist: &OrientationHistogram, threshold: f64) -> PatchClassLabel {
    classify_bins(hist.bins(), threshold)
}

fn classify_bins(bins: &[f64], threshold: f64) -> PatchClassLabel {
    let total: f64 = bins.iter().sum();
    if total <= 0.0 {
        return PatchClassLabel(0);
    }
    let mut best = 0;
    for (j, &v) in bins.iter().enumerate() {
        if v > bins[best] {
            best = j;
        }
    }
    if bins[best] / total < threshold {
        PatchClassLabel(0)
    } else {
        PatchClassLabel(best + 1)
    }
}

/// Labels every column of a patch matrix (`n² x P`).
pub fn classify_columns(data: &DMatrix<f64>, n: usize, bins: usize, threshold: f64) -> Result<Vec<PatchClassLabel>> {
    if data.nrows() != n * n {
        return param_err(format!("patch rows {} do not match window {n}", data.nrows()));
    }
    if bins == 0 {
        return param_err("bin count must be at least 1");
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return param_err(format!("threshold must lie in (0, 1), got {threshold}"));
    }
    Ok(data
        .column_iter()
        .map(|col| {
            let col = col.clone_owned();
            classify_bins(&histogram_unchecked(col.as_slice(), n, bins), threshold)
        })
        .collect())
}

/// Groups column indices by label; returns `bins + 1` disjoint sets.
pub fn group_by_label(labels: &[PatchClassLabel], bins: usize) -> Vec<Vec<usize>> {
    let mut sets = vec![Vec::new(); bins + 1];
    for (i, l) in labels.iter().enumerate() {
        sets[l.0].push(i);
    }
    sets
}

pub fn partition_patches(patches: &PatchMatrix, bins: usize, threshold: f64) -> Result<Vec<Vec<usize>>> {
    let labels = classify_columns(patches.data(), patches.geometry().window(), bins, threshold)?;
    Ok(group_by_label(&labels, bins))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::GrayImage;
    use crate::patching::extract_patches;
    use proptest::prelude::*;

    /// Independent per-pixel oracle: explicit neighbour lookups and bin
    /// search by interval membership.
    fn oracle_histogram(patch: &[f64], n: usize, bins: usize) -> Vec<f64> {
        let px = |r: isize, c: isize| {
            let r = r.clamp(0, n as isize - 1) as usize;
            let c = c.clamp(0, n as isize - 1) as usize;
            patch[r * n + c]
        };
        let width = 180.0 / bins as f64;
        let mut hist = vec![0.0; bins];
        for r in 0..n as isize {
            for c in 0..n as isize {
                let gx = px(r, c + 1) - px(r, c - 1);
                let gy = px(r + 1, c) - px(r - 1, c);
                let mag = gx.hypot(gy);
                if mag == 0.0 {
                    continue;
                }
                let mut ang = gy.atan2(gx) * 180.0 / std::f64::consts::PI;
                while ang < 0.0 {
                    ang += 180.0;
                }
                while ang >= 180.0 {
                    ang -= 180.0;
                }
                let j =
                    (0..bins).find(|&j| ang >= j as f64 * width && ang < (j + 1) as f64 * width).unwrap_or(bins - 1);
                hist[j] += mag;
            }
        }
        hist
    }

    fn oracle_class(hist: &[f64], t: f64) -> usize {
        let s: f64 = hist.iter().sum();
        if s == 0.0 {
            return 0;
        }
        let mut best = 0;
        for j in 1..hist.len() {
            if hist[j] > hist[best] {
                best = j;
            }
        }
        if hist[best] / s < t {
            0
        } else {
            best + 1
        }
    }

    #[test]
    fn constant_patch_has_empty_histogram() {
        let h = orientation_histogram(&[0.4; 64], 8, 6).unwrap();
        assert!(h.bins().iter().all(|&v| v == 0.0));
        assert_eq!(classify_patch(&h, 0.3), PatchClassLabel(0));
    }

    #[test]
    fn vertical_stripes_land_in_zero_degree_bin() {
        let patch: Vec<f64> = (0..64).map(|i| (i % 8 % 2) as f64).collect();
        let h = orientation_histogram(&patch, 8, 6).unwrap();
        let oracle = oracle_histogram(&patch, 8, 6);
        assert_eq!(h.bins(), oracle.as_slice());
        // only the two edge columns see a gradient: 16 pixels of magnitude 1
        assert_eq!(h.bins()[0], 16.0);
        assert!(h.bins()[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn diagonal_ramp_dominated_by_45_degree_bin() {
        let patch: Vec<f64> = (0..64).map(|i| ((i / 8) + (i % 8)) as f64 / 14.0).collect();
        let h = orientation_histogram(&patch, 8, 6).unwrap();
        let oracle = oracle_histogram(&patch, 8, 6);
        for (a, b) in h.bins().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
        // 45° falls in [30°, 60°), the second bin; replicate edges push the
        // border pixels to 26.6° and 63.4°.
        let step = 1.0 / 14.0;
        let interior = 36.0 * 2.0 * std::f64::consts::SQRT_2 * step + 4.0 * std::f64::consts::SQRT_2 * step;
        let edge = 12.0 * 5f64.sqrt() * step;
        assert!((h.bins()[1] - interior).abs() < 1e-12);
        assert!((h.bins()[0] - edge).abs() < 1e-12);
        assert!((h.bins()[2] - edge).abs() < 1e-12);
        assert_eq!(classify_patch(&h, 0.3), PatchClassLabel(2));
    }

    #[test]
    fn classification_examples() {
        let peaked = OrientationHistogram::from_bins(vec![9.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(classify_patch(&peaked, 0.3), PatchClassLabel(1));
        let flat = OrientationHistogram::from_bins(vec![1.0; 6]).unwrap();
        assert_eq!(classify_patch(&flat, 0.3), PatchClassLabel(0));
        let zero = OrientationHistogram::from_bins(vec![0.0; 6]).unwrap();
        assert_eq!(classify_patch(&zero, 0.3), PatchClassLabel(0));
        let tie = OrientationHistogram::from_bins(vec![0.0, 5.0, 0.0, 5.0, 0.0, 0.0]).unwrap();
        assert_eq!(classify_patch(&tie, 0.3), PatchClassLabel(2));
    }

    #[test]
    fn wrong_length_rejected() {
        assert!(orientation_histogram(&[0.0; 63], 8, 6).is_err());
        assert!(orientation_histogram(&[0.0; 64], 8, 0).is_err());
    }

    #[test]
    fn constant_image_partitions_into_class_zero() {
        let img = GrayImage::constant(12, 12, 0.5).unwrap();
        let p = extract_patches(&img, 8, 1).unwrap();
        let sets = partition_patches(&p, 6, 0.3).unwrap();
        assert_eq!(sets.len(), 7);
        assert_eq!(sets[0].len(), 25);
        assert!(sets[1..].iter().all(|s| s.is_empty()));
    }

    #[test]
    fn stripe_image_patches_share_one_class() {
        let img = GrayImage::from_fn(16, 16, |_, c| if (c / 2) % 2 == 0 { 0.1 } else { 0.9 }).unwrap();
        let p = extract_patches(&img, 8, 1).unwrap();
        let sets = partition_patches(&p, 6, 0.3).unwrap();
        for q in 0..p.data().ncols() {
            let col = p.data().column(q).clone_owned();
            let expected = oracle_class(&oracle_histogram(col.as_slice(), 8, 6), 0.3);
            assert!(sets[expected].contains(&q));
        }
        let non_flat: Vec<usize> = (1..7).filter(|&j| !sets[j].is_empty()).collect();
        assert_eq!(non_flat, vec![1]);
        assert!(sets[0].is_empty());
    }

    fn rotate90(patch: &[f64], n: usize) -> Vec<f64> {
        // out[r][c] = in[c][n-1-r]  (counter-clockwise)
        let mut out = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                out[r * n + c] = patch[c * n + (n - 1 - r)];
            }
        }
        out
    }

    proptest! {
        #[test]
        fn histogram_total_equals_gradient_magnitude_sum(vals in proptest::collection::vec(0.0f64..1.0, 64)) {
            let h = orientation_histogram(&vals, 8, 6).unwrap();
            let direct: f64 = patch_gradients(&vals, 8).iter().map(|(x, y)| (x * x + y * y).sqrt()).sum();
            prop_assert!((h.total() - direct).abs() < 1e-12);
            let oracle = oracle_histogram(&vals, 8, 6);
            for (a, b) in h.bins().iter().zip(&oracle) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn classification_is_scale_invariant(vals in proptest::collection::vec(0.0f64..1.0, 64), scale in 0.01f64..50.0) {
            let h = orientation_histogram(&vals, 8, 6).unwrap();
            let scaled: Vec<f64> = vals.iter().map(|v| v * scale).collect();
            let hs = orientation_histogram(&scaled, 8, 6).unwrap();
            for (a, b) in h.bins().iter().zip(hs.bins()) {
                prop_assert!((a * scale - b).abs() < 1e-9 * (1.0 + b));
            }
            prop_assert_eq!(classify_patch(&h, 0.3), classify_patch(&hs, 0.3));
        }

        #[test]
        fn rotation_shifts_bins_by_half(vals in proptest::collection::vec(0.0f64..1.0, 64)) {
            let h = orientation_histogram(&vals, 8, 6).unwrap();
            let hr = orientation_histogram(&rotate90(&vals, 8), 8, 6).unwrap();
            for j in 0..6 {
                prop_assert!((h.bins()[j] - hr.bins()[(j + 3) % 6]).abs() < 1e-12);
            }
        }

        #[test]
        fn partition_is_disjoint_and_exhaustive(vals in proptest::collection::vec(0.0f64..1.0, 144)) {
            let img = GrayImage::new(12, 12, vals).unwrap();
            let p = extract_patches(&img, 4, 2).unwrap();
            let sets = partition_patches(&p, 6, 0.3).unwrap();
            let mut seen = vec![false; p.data().ncols()];
            for s in &sets {
                for &q in s {
                    prop_assert!(!seen[q]);
                    seen[q] = true;
                }
            }
            prop_assert!(seen.iter().all(|&b| b));
        }
    }
}
