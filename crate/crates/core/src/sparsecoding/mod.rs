//! Sparse coding, K-SVD sub-dictionaries and global dictionary assembly.

mod dictionary;
mod ksvd;
mod omp;

pub use dictionary::{distinct_normalized, Dictionary, COHERENCE_LIMIT, UNIT_NORM_TOL};
pub use ksvd::{ksvd_train, KsvdOutcome, KsvdParams};
pub use omp::{omp, SparseCode, RESIDUAL_FLOOR};

use nalgebra::{DMatrix, DVector};

use crate::error::{param_err, FusionError, Result};

/// Per-class outcome of global dictionary assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTraining {
    pub class: usize,
    pub patches: usize,
    pub atoms: usize,
    /// True when the sub-dictionary came from K-SVD rather than the
    /// distinct-patch fallback.
    pub trained: bool,
    pub final_error: Option<f64>,
}

/// Trains one sub-dictionary per non-empty class and concatenates them in
/// class order.
///
/// Classes holding fewer than `params.atoms` patches contribute their
/// distinct normalized patches instead of a trained sub-dictionary. Class
/// `j` is trained with seed `params.seed + j`.
pub fn build_global_dictionary(classes: &[DMatrix<f64>], params: &KsvdParams) -> Result<Dictionary> {
    build_global_dictionary_with_stats(classes, params).map(|(d, _)| d)
}

pub fn build_global_dictionary_with_stats(
    classes: &[DMatrix<f64>],
    params: &KsvdParams,
) -> Result<(Dictionary, Vec<ClassTraining>)> {
    params.validate()?;
    if classes.is_empty() {
        return param_err("at least one class matrix is required");
    }
    let dim = classes[0].nrows();
    if let Some(bad) = classes.iter().find(|m| m.nrows() != dim) {
        return param_err(format!("class matrices disagree on patch dimension: {} vs {dim}", bad.nrows()));
    }
    if classes.iter().all(|m| m.ncols() == 0) {
        return Err(FusionError::Internal("every patch class is empty".into()));
    }
    let max_label = classes.len() - 1;

    let mut columns: Vec<DVector<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut stats = Vec::with_capacity(classes.len());
    for (j, data) in classes.iter().enumerate() {
        if data.ncols() == 0 {
            stats.push(ClassTraining { class: j, patches: 0, atoms: 0, trained: false, final_error: None });
            continue;
        }
        let (atoms, trained, final_error) = if data.ncols() < params.atoms {
            let atoms = distinct_normalized(data, 0..data.ncols(), usize::MAX);
            (atoms, false, None)
        } else {
            let class_params = KsvdParams { seed: params.seed.wrapping_add(j as u64), ..*params };
            let out = ksvd_train(data, &class_params)?;
            let atoms = out.atoms.column_iter().map(|c| c.clone_owned()).collect();
            (atoms, out.trained, out.error_history.last().copied())
        };
        stats.push(ClassTraining { class: j, patches: data.ncols(), atoms: atoms.len(), trained, final_error });
        labels.extend(std::iter::repeat_n(j, atoms.len()));
        columns.extend(atoms);
    }
    if columns.is_empty() {
        // only all-zero patches: a single flat atom keeps the dictionary usable
        columns.push(DVector::from_element(dim, 1.0 / (dim as f64).sqrt()));
        labels.push(0);
    }
    let dict = Dictionary::new(DMatrix::from_columns(&columns), labels, max_label)?;
    Ok((dict, stats))
}

/// Copies the listed columns of `data` into a new matrix.
pub fn select_columns(data: &DMatrix<f64>, indices: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(data.nrows(), indices.len());
    for (dst, &src) in indices.iter().enumerate() {
        out.set_column(dst, &data.column(src));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(d: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(d, p, |_, _| rng.random_range(0.0..1.0))
    }

    #[test]
    fn concatenates_in_class_order() {
        let params = KsvdParams { atoms: 4, sparsity: 2, iterations: 3, seed: 0 };
        let classes = vec![random_data(9, 30, 1), DMatrix::zeros(9, 0), random_data(9, 5, 2), random_data(9, 20, 3)];
        let (dict, stats) = build_global_dictionary_with_stats(&classes, &params).unwrap();
        assert_eq!(dict.len(), 12);
        assert_eq!(dict.labels(), &[0, 0, 0, 0, 2, 2, 2, 2, 3, 3, 3, 3]);
        assert_eq!(dict.class_sizes(), vec![4, 0, 4, 4]);
        assert!(stats[0].trained && !stats[1].trained && stats[2].trained);
    }

    #[test]
    fn small_class_uses_normalized_patches() {
        let params = KsvdParams { atoms: 128, ..KsvdParams::default() };
        let data = random_data(64, 5, 7);
        let dict = build_global_dictionary(std::slice::from_ref(&data), &params).unwrap();
        assert_eq!(dict.len(), 5);
        for q in 0..5 {
            let expected = data.column(q) / data.column(q).norm();
            assert!((dict.atoms().column(q) - expected).norm() < 1e-15);
        }
    }

    #[test]
    fn only_class_zero_gives_d0() {
        let params = KsvdParams { atoms: 8, sparsity: 2, iterations: 2, seed: 0 };
        let mut classes = vec![random_data(16, 40, 4)];
        classes.extend((0..6).map(|_| DMatrix::zeros(16, 0)));
        let dict = build_global_dictionary(&classes, &params).unwrap();
        assert_eq!(dict.len(), 8);
        assert!(dict.labels().iter().all(|&l| l == 0));
        assert_eq!(dict.classes(), 6);
    }

    #[test]
    fn all_empty_is_internal_error() {
        let classes = vec![DMatrix::<f64>::zeros(4, 0); 3];
        assert!(matches!(build_global_dictionary(&classes, &KsvdParams::default()), Err(FusionError::Internal(_))));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let classes = vec![random_data(4, 3, 1), random_data(5, 3, 2)];
        assert!(matches!(build_global_dictionary(&classes, &KsvdParams::default()), Err(FusionError::Parameter(_))));
    }
}
