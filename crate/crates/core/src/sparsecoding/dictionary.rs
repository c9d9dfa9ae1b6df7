use nalgebra::{DMatrix, DVector};

use crate::error::{param_err, Result};

/// Tolerance on atom norms.
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// Atoms with `|<a, b>|` above this are treated as duplicates.
pub const COHERENCE_LIMIT: f64 = 0.99;

/// Column-wise dictionary of unit-norm atoms, each tagged with the patch
/// class it was learned from.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
    labels: Vec<usize>,
    classes: usize,
}

impl Dictionary {
    /// `classes` is the number of orientation bins `L`; labels must lie in `0..=L`.
    pub fn new(atoms: DMatrix<f64>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if atoms.ncols() == 0 || atoms.nrows() == 0 {
            return param_err("dictionary needs at least one atom of positive dimension");
        }
        if labels.len() != atoms.ncols() {
            return param_err("one label per atom required");
        }
        if let Some(l) = labels.iter().find(|&&l| l > classes) {
            return param_err(format!("atom label {l} exceeds class count {classes}"));
        }
        check_unit_norm(&atoms)?;
        Ok(Self { atoms, labels, classes })
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn len(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.ncols() == 0
    }

    /// Atom count per class label, `0..=L`.
    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.classes + 1];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

pub(crate) fn check_unit_norm(atoms: &DMatrix<f64>) -> Result<()> {
    for (k, col) in atoms.column_iter().enumerate() {
        let norm = col.norm();
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return param_err(format!("atom {k} has norm {norm}, expected 1"));
        }
    }
    Ok(())
}

/// Normalized copies of the columns of `data` with pairwise coherence at
/// most [`COHERENCE_LIMIT`], scanning columns in order and skipping zero
/// columns. Stops once `limit` atoms have been collected.
pub fn distinct_normalized(
    data: &DMatrix<f64>,
    order: impl IntoIterator<Item = usize>,
    limit: usize,
) -> Vec<DVector<f64>> {
    let mut kept: Vec<DVector<f64>> = Vec::new();
    for q in order {
        if kept.len() >= limit {
            break;
        }
        let col = data.column(q);
        let norm = col.norm();
        if !(norm > 0.0) {
            continue;
        }
        let atom = col / norm;
        if kept.iter().all(|a| a.dot(&atom).abs() <= COHERENCE_LIMIT) {
            kept.push(atom);
        }
    }
    kept
}
