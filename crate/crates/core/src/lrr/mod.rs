//! Low-rank representation over a fixed dictionary, solved by inexact ALM,
//! and its proximal building blocks.

mod prox;
mod solver;

pub use prox::{
    column_l1_norms, l21_norm, nuclear_norm, shrink_l21, singular_values, spectral_norm, svt, svt_with_rank,
};
pub use solver::{lrr_solve, LrrDiagnostics, LrrParams, LrrSolution};
