use nalgebra::{DMatrix, DVector};

use super::dictionary::check_unit_norm;
use crate::error::{param_err, Result};

/// Residual norm below which pursuit stops early.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

/// Sparse code as parallel `(atom index, coefficient)` lists, in selection order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseCode {
    pub indices: Vec<usize>,
    pub coeffs: Vec<f64>,
}

impl SparseCode {
    pub fn single(index: usize, coeff: f64) -> Self {
        Self { indices: vec![index], coeffs: vec![coeff] }
    }

    pub fn to_dense(&self, len: usize) -> DVector<f64> {
        let mut out = DVector::zeros(len);
        for (&k, &c) in self.indices.iter().zip(&self.coeffs) {
            out[k] += c;
        }
        out
    }

    pub fn coeff_of(&self, atom: usize) -> Option<f64> {
        self.indices.iter().position(|&k| k == atom).map(|p| self.coeffs[p])
    }
}

/// Orthogonal matching pursuit against a unit-norm dictionary.
///
/// Returns a dense `K`-vector with at most `sparsity` non-zeros.
pub fn omp(atoms: &DMatrix<f64>, signal: &DVector<f64>, sparsity: usize) -> Result<DVector<f64>> {
    if signal.len() != atoms.nrows() {
        return param_err(format!("signal length {} does not match atom dimension {}", signal.len(), atoms.nrows()));
    }
    if sparsity == 0 || sparsity > atoms.nrows().min(atoms.ncols()) {
        return param_err(format!("sparsity {sparsity} must lie in 1..={}", atoms.nrows().min(atoms.ncols())));
    }
    check_unit_norm(atoms)?;
    let coder = SparseCoder::new(atoms);
    Ok(coder.code(signal, sparsity).to_dense(atoms.ncols()))
}

/// OMP with a precomputed Gram matrix, reused across many signals.
pub(crate) struct SparseCoder<'a> {
    atoms: &'a DMatrix<f64>,
    gram: DMatrix<f64>,
}

impl<'a> SparseCoder<'a> {
    pub fn new(atoms: &'a DMatrix<f64>) -> Self {
        let gram = atoms.transpose() * atoms;
        Self { atoms, gram }
    }

    pub fn code(&self, signal: &DVector<f64>, sparsity: usize) -> SparseCode {
        let corr0 = self.atoms.transpose() * signal;
        self.code_with_correlations(signal, &corr0, sparsity)
    }

    /// `corr0` must equal `Dᵀ·signal`.
    pub fn code_with_correlations(&self, signal: &DVector<f64>, corr0: &DVector<f64>, sparsity: usize) -> SparseCode {
        let k_total = self.atoms.ncols();
        let mut code = SparseCode::default();
        if signal.norm() < RESIDUAL_FLOOR {
            return code;
        }
        let mut corr = corr0.clone();
        let mut selected = vec![false; k_total];
        while code.indices.len() < sparsity {
            let mut best = None;
            let mut best_abs = 0.0;
            for (k, &c) in corr.iter().enumerate() {
                if !selected[k] && c.abs() > best_abs {
                    best_abs = c.abs();
                    best = Some(k);
                }
            }
            let Some(k) = best else { break };
            code.indices.push(k);
            let s = code.indices.len();
            let sub_gram = DMatrix::from_fn(s, s, |i, j| self.gram[(code.indices[i], code.indices[j])]);
            let rhs = DVector::from_fn(s, |i, _| corr0[code.indices[i]]);
            let Some(chol) = sub_gram.cholesky() else {
                // atom is linearly dependent on the current support
                code.indices.pop();
                break;
            };
            selected[k] = true;
            let gamma = chol.solve(&rhs);
            code.coeffs = gamma.as_slice().to_vec();

            let mut residual = signal.clone();
            for (&idx, &g) in code.indices.iter().zip(&code.coeffs) {
                residual.axpy(-g, &self.atoms.column(idx), 1.0);
            }
            if residual.norm() < RESIDUAL_FLOOR {
                break;
            }
            corr.copy_from(corr0);
            for (&idx, &g) in code.indices.iter().zip(&code.coeffs) {
                corr.axpy(-g, &self.gram.column(idx), 1.0);
            }
        }
        code
    }
}
