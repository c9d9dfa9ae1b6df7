use nalgebra::{DMatrix, SymmetricEigen};

/// Use the Gram-matrix route when the short side is at most this fraction
/// of the long side.
const GRAM_RATIO: usize = 4;

fn use_gram(m: &DMatrix<f64>) -> bool {
    let (r, c) = m.shape();
    r.min(c) * GRAM_RATIO <= r.max(c)
}

/// Singular value thresholding: `U · max(Σ - tau, 0) · Vᵀ`.
pub fn svt(m: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    svt_with_rank(m, tau).0
}

/// [`svt`] plus the number of singular values above `tau`.
pub fn svt_with_rank(m: &DMatrix<f64>, tau: f64) -> (DMatrix<f64>, usize) {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return (m.clone(), 0);
    }
    if use_gram(m) {
        svt_gram(m, tau)
    } else {
        svt_direct(m, tau)
    }
}

fn svt_direct(m: &DMatrix<f64>, tau: f64) -> (DMatrix<f64>, usize) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    let mut rank = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        let shrunk = s - tau;
        if shrunk > 0.0 {
            rank += 1;
            out += (u.column(i) * shrunk) * v_t.row(i);
        }
    }
    (out, rank)
}

/// Thresholds through the eigen-decomposition of the smaller Gram matrix.
/// With `G = M Mᵀ = U Λ Uᵀ` the result is `U_k diag(1 - tau/σ) U_kᵀ M`.
fn svt_gram(m: &DMatrix<f64>, tau: f64) -> (DMatrix<f64>, usize) {
    let wide = m.nrows() <= m.ncols();
    let gram = if wide { m * m.transpose() } else { m.transpose() * m };
    let eig = SymmetricEigen::new(gram);
    let n = eig.eigenvalues.len();
    let mut proj = DMatrix::zeros(n, n);
    let mut rank = 0;
    for i in 0..n {
        let sigma = eig.eigenvalues[i].max(0.0).sqrt();
        if sigma > tau {
            rank += 1;
            let w = 1.0 - tau / sigma;
            let v = eig.eigenvectors.column(i);
            proj += (v * w) * v.transpose();
        }
    }
    if rank == 0 {
        return (DMatrix::zeros(m.nrows(), m.ncols()), 0);
    }
    let out = if wide { &proj * m } else { m * &proj };
    (out, rank)
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = if use_gram(m) {
        let gram = if m.nrows() <= m.ncols() { m * m.transpose() } else { m.transpose() * m };
        SymmetricEigen::new(gram).eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect()
    } else {
        m.singular_values().iter().copied().collect()
    };
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn nuclear_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).iter().sum()
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Column-wise shrinkage, the proximal operator of `tau · ‖·‖_{2,1}`.
pub fn shrink_l21(m: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let mut out = m.clone();
    shrink_l21_in_place(&mut out, tau);
    out
}

pub(crate) fn shrink_l21_in_place(m: &mut DMatrix<f64>, tau: f64) {
    for mut col in m.column_iter_mut() {
        let norm = col.norm();
        let scale = if norm > tau { 1.0 - tau / norm } else { 0.0 };
        if scale != 1.0 {
            col *= scale;
        }
    }
}

/// Sum of column Euclidean norms.
pub fn l21_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.norm()).sum()
}

/// `‖Z_i‖₁` for every column `i`.
pub fn column_l1_norms(z: &DMatrix<f64>) -> Vec<f64> {
    z.column_iter().map(|c| c.iter().map(|v| v.abs()).sum()).collect()
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(r: usize, c: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_threshold_is_identity() {
        for &(r, c) in &[(10, 7), (3, 20), (20, 3)] {
            let m = random(r, c, (r * c) as u64);
            assert!((svt(&m, 0.0) - &m).amax() < 1e-12);
        }
    }

    #[test]
    fn diagonal_example() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let out = svt(&m, 2.0);
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!((out - expected).amax() < 1e-12);
    }

    #[test]
    fn gram_route_matches_direct_svd() {
        for &(r, c) in &[(5, 40), (40, 5), (8, 64)] {
            let m = random(r, c, 3 + r as u64);
            for &tau in &[0.0, 0.3, 1.0, 2.5] {
                let (a, ra) = svt_gram(&m, tau);
                let (b, rb) = svt_direct(&m, tau);
                assert_eq!(ra, rb);
                assert!((a - b).amax() < 1e-8);
            }
        }
    }

    #[test]
    fn rank_counts_surviving_singular_values() {
        // singular values 5, 3, 1 with random orthogonal factors
        let q1 = random(6, 3, 1).qr().q();
        let q2 = random(4, 3, 2).qr().q();
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[5.0, 3.0, 1.0]));
        let m = &q1 * s * q2.transpose();
        for (tau, rank) in [(0.5, 3), (2.0, 2), (4.0, 1), (6.0, 0)] {
            let (out, r) = svt_with_rank(&m, tau);
            assert_eq!(r, rank);
            assert!(nuclear_norm(&out) <= nuclear_norm(&m) + 1e-12);
            let expected: f64 = [5.0f64, 3.0, 1.0].iter().map(|v| (v - tau).max(0.0)).sum();
            assert!((nuclear_norm(&out) - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn shrink_examples() {
        let m = DMatrix::from_column_slice(2, 3, &[3.0, 4.0, 0.9, 1.2, 0.0, 0.0]);
        let out = shrink_l21(&m, 2.0);
        assert!((out[(0, 0)] - 1.8).abs() < 1e-15 && (out[(1, 0)] - 2.4).abs() < 1e-15);
        assert_eq!(out.column(1).norm(), 0.0);
        assert_eq!(out.column(2).norm(), 0.0);
        assert_eq!(shrink_l21(&m, 0.0), m);
    }

    #[test]
    fn l1_norms() {
        let z = DMatrix::from_column_slice(3, 2, &[1.0, -2.0, 3.0, 0.0, 0.0, 0.0]);
        assert_eq!(column_l1_norms(&z), vec![6.0, 0.0]);
        let m = random(5, 4, 8);
        let norms = column_l1_norms(&m);
        for c in 0..4 {
            let mut brute = 0.0;
            for r in 0..5 {
                brute += m[(r, c)].abs();
            }
            assert!((norms[c] - brute).abs() < 1e-15);
        }
    }
}
