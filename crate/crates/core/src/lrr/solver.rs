use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use super::prox::{l21_norm, max_abs, nuclear_norm, shrink_l21_in_place, spectral_norm, svt};
use crate::error::{param_err, FusionError, Result};

/// Inexact ALM settings for `min ‖Z‖_* + λ‖E‖_{2,1}  s.t.  X = D Z + E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrrParams {
    pub lambda: f64,
    /// Initial penalty; `None` uses `1e-2 / σ₁(X)` (or `1e-2` for `X = 0`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu0: Option<f64>,
    pub rho: f64,
    pub mu_max: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// Solve in the row space of `D` (orthonormal basis of `range(Dᵀ)`),
    /// which has the same minimizer and a much smaller coefficient matrix
    /// when `D` is overcomplete.
    #[serde(default = "default_true")]
    pub reduce_dictionary: bool,
}

fn default_true() -> bool {
    true
}

impl Default for LrrParams {
    fn default() -> Self {
        Self { lambda: 100.0, mu0: None, rho: 1.1, mu_max: 1e10, tol: 1e-6, max_iters: 1000, reduce_dictionary: true }
    }
}

impl LrrParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return param_err(format!("lambda must be positive, got {}", self.lambda));
        }
        if let Some(mu) = self.mu0 {
            if !(mu > 0.0) {
                return param_err(format!("mu0 must be positive, got {mu}"));
            }
        }
        if !(self.rho > 1.0) {
            return param_err(format!("rho must exceed 1, got {}", self.rho));
        }
        if !(self.mu_max > 0.0) || !(self.tol > 0.0) {
            return param_err("mu_max and tol must be positive");
        }
        if self.max_iters == 0 {
            return param_err("max_iters must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LrrSolution {
    /// `K x Q` coefficients.
    pub z: DMatrix<f64>,
    /// `d x Q` column-sparse error.
    pub e: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `‖X - D Z - E‖_∞`
    pub feasibility: f64,
    /// `‖Z - J‖_∞` of the splitting variable at exit.
    pub split: f64,
    /// `‖Z‖_* + λ‖E‖_{2,1}`
    pub objective: f64,
}

/// Diagnostics without the matrices, for reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrrDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub feasibility: f64,
    pub split: f64,
    pub objective: f64,
}

impl LrrSolution {
    pub fn diagnostics(&self) -> LrrDiagnostics {
        LrrDiagnostics {
            iterations: self.iterations,
            converged: self.converged,
            feasibility: self.feasibility,
            split: self.split,
            objective: self.objective,
        }
    }
}

/// Solves the dictionary low-rank representation problem by inexact ALM.
///
/// Passing `dict = x` gives the self-expressive model.
pub fn lrr_solve(x: &DMatrix<f64>, dict: &DMatrix<f64>, params: &LrrParams) -> Result<LrrSolution> {
    params.validate()?;
    if dict.nrows() != x.nrows() {
        return param_err(format!(
            "dictionary atom dimension {} does not match data dimension {}",
            dict.nrows(),
            x.nrows()
        ));
    }
    if dict.ncols() == 0 {
        return param_err("dictionary has no atoms");
    }
    let mu0 = params.mu0.unwrap_or_else(|| {
        let s1 = spectral_norm(x);
        if s1 > 0.0 {
            1e-2 / s1
        } else {
            1e-2
        }
    });

    if !params.reduce_dictionary {
        return Ok(inexact_alm(x, dict, params, mu0)?.into_solution(params.lambda, true));
    }

    let basis = row_space_basis(dict);
    if basis.ncols() == 0 {
        // zero dictionary: Z = 0 and the data is all error
        let z = DMatrix::zeros(dict.ncols(), x.ncols());
        return Ok(inexact_alm(x, dict, params, mu0)?.with_z(z).into_solution(params.lambda, true));
    }
    let reduced = dict * &basis;
    let mut state = inexact_alm(x, &reduced, params, mu0)?;
    let objective = nuclear_norm(&state.z) + params.lambda * l21_norm(&state.e);
    state.z = &basis * &state.z;
    let feasibility = max_abs(&(x - dict * &state.z - &state.e));
    Ok(LrrSolution {
        z: state.z,
        e: state.e,
        iterations: state.iterations,
        converged: state.converged,
        feasibility,
        split: state.split,
        objective,
    })
}

/// Orthonormal basis (`K x r`) of the row space of `dict`.
fn row_space_basis(dict: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = dict.transpose().svd(true, false);
    let u = svd.u.expect("requested U");
    let s = &svd.singular_values;
    let s_max = s.iter().fold(0.0f64, |a, &b| a.max(b));
    let cutoff = s_max * dict.nrows().max(dict.ncols()) as f64 * f64::EPSILON;
    let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > cutoff && s[i] > 0.0).collect();
    let mut basis = DMatrix::zeros(dict.ncols(), keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        basis.set_column(dst, &u.column(src));
    }
    basis
}

struct AlmState {
    z: DMatrix<f64>,
    e: DMatrix<f64>,
    iterations: usize,
    converged: bool,
    feasibility: f64,
    split: f64,
}

impl AlmState {
    fn with_z(mut self, z: DMatrix<f64>) -> Self {
        self.z = z;
        self
    }

    fn into_solution(self, lambda: f64, compute_objective: bool) -> LrrSolution {
        let objective = if compute_objective { nuclear_norm(&self.z) + lambda * l21_norm(&self.e) } else { f64::NAN };
        LrrSolution {
            z: self.z,
            e: self.e,
            iterations: self.iterations,
            converged: self.converged,
            feasibility: self.feasibility,
            split: self.split,
            objective,
        }
    }
}

fn inexact_alm(x: &DMatrix<f64>, dict: &DMatrix<f64>, params: &LrrParams, mu0: f64) -> Result<AlmState> {
    let (d, q) = x.shape();
    let k = dict.ncols();
    let dict_t = dict.transpose();
    let normal = DMatrix::<f64>::identity(k, k) + &dict_t * dict;
    let chol: Cholesky<f64, Dyn> =
        Cholesky::new(normal).ok_or_else(|| FusionError::Internal("I + DᵀD is not positive definite".into()))?;

    let mut z = DMatrix::<f64>::zeros(k, q);
    let mut e = DMatrix::<f64>::zeros(d, q);
    let mut y1 = DMatrix::<f64>::zeros(d, q);
    let mut y2 = DMatrix::<f64>::zeros(k, q);
    let mut mu = mu0;

    let mut best: Option<AlmState> = None;
    let mut best_score = f64::INFINITY;

    for it in 1..=params.max_iters {
        let inv_mu = 1.0 / mu;
        let j = svt(&(&z + &y2 * inv_mu), inv_mu);

        // Z = (I + DᵀD)⁻¹ (Dᵀ(X - E + Y1/μ) + J - Y2/μ)
        let mut target = x - &e;
        target += &y1 * inv_mu;
        let mut rhs = &dict_t * &target;
        rhs += &j;
        rhs -= &y2 * inv_mu;
        chol.solve_mut(&mut rhs);
        z = rhs;

        let dz = dict * &z;
        let mut next_e = x - &dz;
        next_e += &y1 * inv_mu;
        shrink_l21_in_place(&mut next_e, params.lambda * inv_mu);
        e = next_e;

        let mut r1 = x - &dz;
        r1 -= &e;
        let r2 = &z - &j;
        y1 += &r1 * mu;
        y2 += &r2 * mu;

        let feasibility = max_abs(&r1);
        let split = max_abs(&r2);
        let converged = feasibility <= params.tol && split <= params.tol;
        if converged {
            return Ok(AlmState { z, e, iterations: it, converged, feasibility, split });
        }
        let score = feasibility.max(split);
        if score < best_score {
            best_score = score;
            best = Some(AlmState { z: z.clone(), e: e.clone(), iterations: it, converged, feasibility, split });
        }
        mu = (params.rho * mu).min(params.mu_max);
    }
    let mut state = best.expect("at least one iteration ran");
    state.iterations = params.max_iters;
    Ok(state)
}
