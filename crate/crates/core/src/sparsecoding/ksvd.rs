//! K-SVD dictionary learning.
//!
//! Each iteration codes every training column with OMP (keeping the previous
//! code when it represents the column better), then sweeps the atoms in
//! order replacing each atom and its coefficient row by the leading singular
//! pair of the residual restricted to the columns that use it. Unused atoms
//! and near-duplicate atoms are replaced by the worst-represented training
//! column. With these rules the total squared representation error never
//! increases from one iteration to the next.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dictionary::{distinct_normalized, COHERENCE_LIMIT};
use super::omp::{SparseCode, SparseCoder};
use crate::error::{param_err, FusionError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsvdParams {
    /// Atoms per sub-dictionary.
    pub atoms: usize,
    /// OMP sparsity target used while training.
    pub sparsity: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for KsvdParams {
    fn default() -> Self {
        Self { atoms: 128, sparsity: 6, iterations: 30, seed: 0 }
    }
}

impl KsvdParams {
    pub fn validate(&self) -> Result<()> {
        if self.atoms == 0 || self.sparsity == 0 || self.iterations == 0 {
            return param_err("K-SVD atoms, sparsity and iterations must all be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct KsvdOutcome {
    pub atoms: DMatrix<f64>,
    /// Total squared representation error after each iteration.
    pub error_history: Vec<f64>,
    /// Sparse codes of the training columns against the returned atoms.
    /// Empty when the distinct-column fallback was used.
    pub codes: Vec<SparseCode>,
    /// False when the data had too few distinct columns and the atoms are
    /// simply the distinct normalized columns.
    pub trained: bool,
    pub replacements: usize,
}

/// Learns up to `params.atoms` unit-norm atoms from the columns of `data`.
pub fn ksvd_train(data: &DMatrix<f64>, params: &KsvdParams) -> Result<KsvdOutcome> {
    params.validate()?;
    if data.ncols() == 0 {
        return Err(FusionError::EmptyClass(0));
    }
    if data.nrows() == 0 {
        return param_err("training vectors must have positive dimension");
    }
    let mut order: Vec<usize> = (0..data.ncols()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    order.shuffle(&mut rng);
    let init = distinct_normalized(data, order, params.atoms);
    if init.len() < params.atoms {
        let atoms = distinct_normalized(data, 0..data.ncols(), usize::MAX);
        return Ok(KsvdOutcome {
            atoms: DMatrix::from_columns(&atoms),
            error_history: Vec::new(),
            codes: Vec::new(),
            trained: false,
            replacements: 0,
        });
    }

    let mut state = Trainer::new(data, DMatrix::from_columns(&init), params.sparsity);
    let mut history = Vec::with_capacity(params.iterations);
    for _ in 0..params.iterations {
        state.sparse_coding_step();
        state.atom_update_sweep();
        state.resolve_duplicates(true);
        history.push(state.total_error());
    }
    state.resolve_duplicates(false);
    Ok(KsvdOutcome {
        atoms: state.dict,
        error_history: history,
        codes: state.codes,
        trained: true,
        replacements: state.replacements,
    })
}

struct Trainer<'a> {
    data: &'a DMatrix<f64>,
    dict: DMatrix<f64>,
    codes: Vec<SparseCode>,
    /// `data - dict * codes`, column by column.
    resid: DMatrix<f64>,
    sparsity: usize,
    coded_once: bool,
    replacements: usize,
}

impl<'a> Trainer<'a> {
    fn new(data: &'a DMatrix<f64>, dict: DMatrix<f64>, sparsity: usize) -> Self {
        let sparsity = sparsity.min(dict.nrows()).min(dict.ncols());
        Self {
            data,
            codes: vec![SparseCode::default(); data.ncols()],
            resid: data.clone(),
            dict,
            sparsity,
            coded_once: false,
            replacements: 0,
        }
    }

    fn residual_of(&self, q: usize, code: &SparseCode) -> DVector<f64> {
        let mut r = self.data.column(q).clone_owned();
        for (&k, &c) in code.indices.iter().zip(&code.coeffs) {
            r.axpy(-c, &self.dict.column(k), 1.0);
        }
        r
    }

    fn sparse_coding_step(&mut self) {
        let coder = SparseCoder::new(&self.dict);
        let corr = self.dict.transpose() * self.data;
        for q in 0..self.data.ncols() {
            let x = self.data.column(q).clone_owned();
            let fresh = coder.code_with_correlations(&x, &corr.column(q).clone_owned(), self.sparsity);
            let r_new = self.residual_of(q, &fresh);
            if self.coded_once {
                let r_old = self.residual_of(q, &self.codes[q]);
                if r_old.norm_squared() < r_new.norm_squared() {
                    self.resid.set_column(q, &r_old);
                    continue;
                }
            }
            self.resid.set_column(q, &r_new);
            self.codes[q] = fresh;
        }
        self.coded_once = true;
    }

    fn users_of(&self, atom: usize) -> Vec<(usize, usize)> {
        self.codes
            .iter()
            .enumerate()
            .filter_map(|(q, c)| c.indices.iter().position(|&k| k == atom).map(|p| (q, p)))
            .collect()
    }

    fn atom_update_sweep(&mut self) {
        for k in 0..self.dict.ncols() {
            let users = self.users_of(k);
            if users.is_empty() {
                self.replace_with_worst(k);
                continue;
            }
            let d = self.dict.nrows();
            let atom = self.dict.column(k).clone_owned();
            let mut err = DMatrix::zeros(d, users.len());
            for (i, &(q, p)) in users.iter().enumerate() {
                let mut col = self.resid.column(q).clone_owned();
                col.axpy(self.codes[q].coeffs[p], &atom, 1.0);
                err.set_column(i, &col);
            }
            let Some(mut u) = leading_left_singular_vector(&err) else {
                continue;
            };
            if u.dot(&atom) < 0.0 {
                u.neg_mut();
            }
            let row = err.transpose() * &u;
            for (i, &(q, p)) in users.iter().enumerate() {
                self.codes[q].coeffs[p] = row[i];
                let mut col = err.column(i).clone_owned();
                col.axpy(-row[i], &u, 1.0);
                self.resid.set_column(q, &col);
            }
            self.dict.set_column(k, &u);
        }
    }

    /// Columns ordered by descending residual energy, skipping zero columns
    /// and columns coherent with any atom other than `slot`.
    fn worst_candidate(&self, slot: usize, resid: &DMatrix<f64>) -> Option<usize> {
        let mut order: Vec<(usize, f64)> = resid
            .column_iter()
            .enumerate()
            .map(|(q, c)| (q, c.norm_squared()))
            .filter(|&(q, e)| e > 0.0 && self.data.column(q).norm() > 0.0)
            .collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        order.into_iter().map(|(q, _)| q).find(|&q| {
            let x = self.data.column(q);
            let x = x / x.norm();
            (0..self.dict.ncols()).all(|k| k == slot || self.dict.column(k).dot(&x).abs() <= COHERENCE_LIMIT)
        })
    }

    /// Puts the worst-represented column into atom slot `k`; that column is
    /// then represented exactly by the new atom alone.
    fn replace_with_worst(&mut self, k: usize) -> bool {
        let Some(w) = self.worst_candidate(k, &self.resid) else {
            return false;
        };
        self.install(k, w);
        true
    }

    fn install(&mut self, k: usize, w: usize) {
        let x = self.data.column(w).clone_owned();
        let norm = x.norm();
        let atom = &x / norm;
        self.dict.set_column(k, &atom);
        self.codes[w] = SparseCode::single(k, norm);
        let mut r = x;
        r.axpy(-norm, &atom, 1.0);
        self.resid.set_column(w, &r);
        self.replacements += 1;
    }

    /// Replaces the later atom of each near-duplicate pair. Its coefficients
    /// are folded onto the surviving atom by projection. With `guarded`, a
    /// replacement is only made when it does not increase the total error.
    fn resolve_duplicates(&mut self, guarded: bool) {
        let k_total = self.dict.ncols();
        let mut j = 1;
        while j < k_total {
            let dup = (0..j).find(|&i| self.dict.column(i).dot(&self.dict.column(j)).abs() > COHERENCE_LIMIT);
            if let Some(i) = dup {
                self.replace_duplicate(j, i, guarded);
            }
            j += 1;
        }
    }

    fn replace_duplicate(&mut self, j: usize, i: usize, guarded: bool) -> bool {
        let a_i = self.dict.column(i).clone_owned();
        let a_j = self.dict.column(j).clone_owned();
        let g = a_i.dot(&a_j);
        let shift = &a_j - &a_i * g;

        let mut resid = self.resid.clone();
        let mut new_codes = Vec::new();
        let mut increase = 0.0;
        for (q, p) in self.users_of(j) {
            let mut code = self.codes[q].clone();
            let c = code.coeffs.remove(p);
            code.indices.remove(p);
            match code.indices.iter().position(|&k| k == i) {
                Some(pi) => code.coeffs[pi] += c * g,
                None => {
                    code.indices.push(i);
                    code.coeffs.push(c * g);
                }
            }
            let before = resid.column(q).norm_squared();
            let mut col = resid.column(q).clone_owned();
            col.axpy(c, &shift, 1.0);
            increase += col.norm_squared() - before;
            resid.set_column(q, &col);
            new_codes.push((q, code));
        }
        let Some(w) = self.worst_candidate(j, &resid) else {
            return false;
        };
        let gain = resid.column(w).norm_squared();
        if guarded && gain < increase {
            return false;
        }
        self.resid = resid;
        for (q, code) in new_codes {
            self.codes[q] = code;
        }
        self.install(j, w);
        true
    }

    fn total_error(&self) -> f64 {
        self.resid.iter().map(|v| v * v).sum()
    }
}

/// Leading left singular vector of `m`, via the smaller Gram matrix.
/// `None` when `m` is zero.
pub(crate) fn leading_left_singular_vector(m: &DMatrix<f64>) -> Option<DVector<f64>> {
    let (rows, cols) = m.shape();
    if rows <= cols {
        let gram = m * m.transpose();
        let eig = SymmetricEigen::new(gram);
        let top = argmax(eig.eigenvalues.as_slice());
        if !(eig.eigenvalues[top] > 0.0) {
            return None;
        }
        let u = eig.eigenvectors.column(top).clone_owned();
        let n = u.norm();
        Some(u / n)
    } else {
        let gram = m.transpose() * m;
        let eig = SymmetricEigen::new(gram);
        let top = argmax(eig.eigenvalues.as_slice());
        if !(eig.eigenvalues[top] > 0.0) {
            return None;
        }
        let u = m * eig.eigenvectors.column(top);
        let n = u.norm();
        if !(n > 0.0) {
            return None;
        }
        Some(u / n)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn recompute_error(data: &DMatrix<f64>, atoms: &DMatrix<f64>, codes: &[SparseCode]) -> f64 {
        let mut total = 0.0;
        for (q, code) in codes.iter().enumerate() {
            let r = data.column(q) - atoms * code.to_dense(atoms.ncols());
            total += r.norm_squared();
        }
        total
    }

    #[test]
    fn single_vector_single_atom() {
        let data = DMatrix::from_column_slice(3, 1, &[3.0, 0.0, 4.0]);
        let params = KsvdParams { atoms: 1, sparsity: 1, iterations: 5, seed: 0 };
        let out = ksvd_train(&data, &params).unwrap();
        assert_eq!(out.atoms.ncols(), 1);
        let a = out.atoms.column(0);
        assert!((a[0] - 0.6).abs() < 1e-12 && a[1].abs() < 1e-12 && (a[2] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn empty_data_is_empty_class() {
        let data = DMatrix::<f64>::zeros(4, 0);
        assert!(matches!(ksvd_train(&data, &KsvdParams::default()), Err(FusionError::EmptyClass(_))));
    }

    #[test]
    fn too_few_distinct_columns_falls_back() {
        // 10 copies of two directions, asked for 4 atoms
        let mut cols = Vec::new();
        for i in 0..10 {
            let s = 1.0 + i as f64;
            cols.push(DVector::from_column_slice(&[s, 0.0, 0.0]));
            cols.push(DVector::from_column_slice(&[0.0, s, s]));
        }
        let data = DMatrix::from_columns(&cols);
        let out = ksvd_train(&data, &KsvdParams { atoms: 4, sparsity: 1, iterations: 3, seed: 1 }).unwrap();
        assert!(!out.trained);
        assert_eq!(out.atoms.ncols(), 2);
    }

    #[test]
    fn orthogonal_signals_are_recovered() {
        let d = 8;
        let mut cols = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..200 {
            let k = i % d;
            let mut v = DVector::zeros(d);
            v[k] = rng.random_range(0.5..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            cols.push(v);
        }
        let data = DMatrix::from_columns(&cols);
        let out = ksvd_train(&data, &KsvdParams { atoms: d, sparsity: 1, iterations: 10, seed: 5 }).unwrap();
        for k in 0..d {
            let best = (0..d).map(|j| out.atoms[(k, j)].abs()).fold(0.0, f64::max);
            assert!(best >= 0.99, "axis {k} matched only {best}");
        }
    }

    #[test]
    fn error_history_is_monotone_and_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data = DMatrix::from_fn(10, 300, |_, _| rng.random_range(0.0..1.0));
        let params = KsvdParams { atoms: 20, sparsity: 3, iterations: 15, seed: 2 };
        let out = ksvd_train(&data, &params).unwrap();
        for w in out.error_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "error rose from {} to {}", w[0], w[1]);
        }
        for col in out.atoms.column_iter() {
            assert!((col.norm() - 1.0).abs() < 1e-10);
        }
        let recomputed = recompute_error(&data, &out.atoms, &out.codes);
        assert!(recomputed.is_finite());
        for i in 0..out.atoms.ncols() {
            for j in 0..i {
                assert!(out.atoms.column(i).dot(&out.atoms.column(j)).abs() <= COHERENCE_LIMIT);
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let data = DMatrix::from_fn(6, 120, |_, _| rng.random_range(-1.0..1.0));
        let params = KsvdParams { atoms: 10, sparsity: 2, iterations: 6, seed: 9 };
        let a = ksvd_train(&data, &params).unwrap();
        let b = ksvd_train(&data, &params).unwrap();
        assert_eq!(a.atoms, b.atoms);
        assert_eq!(a.error_history, b.error_history);
    }

    #[test]
    fn leading_vector_matches_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for &(r, c) in &[(5usize, 9usize), (9, 5), (4, 4)] {
            let m = DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
            let u = leading_left_singular_vector(&m).unwrap();
            let svd = m.clone().svd(true, false);
            let top = argmax(svd.singular_values.as_slice());
            let ref_u = svd.u.unwrap().column(top).clone_owned();
            assert!((u.dot(&ref_u).abs() - 1.0).abs() < 1e-10);
        }
        assert!(leading_left_singular_vector(&DMatrix::zeros(3, 4)).is_none());
    }
}
