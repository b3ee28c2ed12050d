//! Kernel-regression node classification.
//!
//! The kernel is split into the labeled block `Θ_l` and the unlabeled ×
//! labeled block `Θ_u`; scores are `Θ_u (Θ_l + λI)^{-1} Y`, computed with a
//! Cholesky solve.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Cholesky;
use serde::Serialize;

use crate::linalg::ensure_symmetric;
use crate::{Error, Matrix, Result, Vector};

/// Number of times the ridge is multiplied by 10 after a failed solve.
pub const RIDGE_RETRIES: usize = 3;
/// Relative bound on the solve residual `‖(Θ_l + λI)z − Y‖ / ‖Y‖`.
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelPartition {
    pub theta_l: Matrix,
    pub theta_u: Matrix,
    pub ridge: f64,
}

impl KernelPartition {
    /// `1e-8 · trace(Θ_l) / m`.
    pub fn default_ridge(theta_l: &Matrix) -> f64 {
        let m = theta_l.nrows().max(1) as f64;
        (1e-8 * theta_l.trace() / m).max(0.0)
    }

    pub fn with_ridge(mut self, ridge: f64) -> Result<Self> {
        if !(ridge.is_finite() && ridge >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ridge must be non-negative, got {ridge}"
            )));
        }
        self.ridge = ridge;
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub scores: Vec<f64>,
    /// `sign(score)` with `sign(0) = +1`.
    pub labels: Vec<f64>,
    /// Ridge that produced the accepted solve.
    pub ridge: f64,
    pub retries: usize,
    pub residual: f64,
    /// `(max L_ii / min L_ii)²` of the Cholesky factor, a cheap condition
    /// estimate of `Θ_l + λI`.
    pub cond_est: f64,
}

fn check_ids(ids: &[usize], n: usize, context: &'static str) -> Result<()> {
    match ids.iter().find(|&&id| id >= n) {
        Some(&id) => Err(Error::IdOutOfRange { id, n, context }),
        None => Ok(()),
    }
}

/// Extracts `Θ_l = Θ[train, train]` and `Θ_u = Θ[test, train]` in list order.
pub fn partition_kernel(
    theta: &Matrix,
    train_ids: &[usize],
    test_ids: &[usize],
) -> Result<KernelPartition> {
    ensure_symmetric(theta, "kernel")?;
    let n = theta.nrows();
    if train_ids.is_empty() {
        return Err(Error::EmptyLabeledSet);
    }
    check_ids(train_ids, n, "train split")?;
    check_ids(test_ids, n, "test split")?;
    let mut seen = vec![false; n];
    for &id in train_ids {
        if std::mem::replace(&mut seen[id], true) {
            return Err(Error::DuplicateSplitId(id, "train"));
        }
    }
    if let Some(&id) = test_ids.iter().find(|&&id| seen[id]) {
        return Err(Error::OverlappingSplit(id));
    }
    let theta_l = theta.select_rows(train_ids).select_columns(train_ids);
    let theta_u = theta.select_rows(test_ids).select_columns(train_ids);
    let ridge = KernelPartition::default_ridge(&theta_l);
    Ok(KernelPartition {
        theta_l,
        theta_u,
        ridge,
    })
}

/// Like [`partition_kernel`] but without the disjointness requirement, for
/// sanity checks that predict on the training nodes themselves.
pub fn partition_kernel_overlapping(
    theta: &Matrix,
    train_ids: &[usize],
    eval_ids: &[usize],
) -> Result<KernelPartition> {
    partition_kernel(theta, train_ids, &[])?;
    check_ids(eval_ids, theta.nrows(), "evaluation ids")?;
    let theta_l = theta.select_rows(train_ids).select_columns(train_ids);
    let theta_u = theta.select_rows(eval_ids).select_columns(train_ids);
    let ridge = KernelPartition::default_ridge(&theta_l);
    Ok(KernelPartition {
        theta_l,
        theta_u,
        ridge,
    })
}

fn attempt(theta_l: &Matrix, y: &Vector, ridge: f64) -> Option<(Vector, f64, f64)> {
    let m = theta_l.nrows();
    let shifted = theta_l + Matrix::identity(m, m) * ridge;
    let chol = Cholesky::new(shifted.clone())?;
    let z = chol.solve(y);
    if z.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let residual = (&shifted * &z - y).norm() / y.norm().max(f64::MIN_POSITIVE);
    if residual > RESIDUAL_TOL {
        return None;
    }
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    Some((z, residual, (hi / lo).powi(2)))
}

/// Kernel-regression scores and `±1` labels for the unlabeled rows.
pub fn predict(part: &KernelPartition, y: &[f64]) -> Result<Prediction> {
    let m = part.theta_l.nrows();
    if m == 0 {
        return Err(Error::EmptyLabeledSet);
    }
    if y.len() != m {
        return Err(Error::LengthMismatch {
            left: m,
            right: y.len(),
        });
    }
    if part.theta_u.ncols() != m {
        return Err(Error::dims(
            "unlabeled block columns",
            m,
            part.theta_u.ncols(),
        ));
    }
    if let Some(&bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidLabel(bad));
    }
    let y = Vector::from_column_slice(y);
    let mut ridge = part.ridge;
    let mut retries = 0;
    let (z, residual, cond_est) = loop {
        if let Some(found) = attempt(&part.theta_l, &y, ridge) {
            break found;
        }
        if retries == RIDGE_RETRIES {
            return Err(Error::SingularKernel {
                ridge,
                attempts: retries + 1,
            });
        }
        let mean_diag = part.theta_l.trace() / m as f64;
        let next = if ridge > 0.0 {
            ridge * 10.0
        } else if mean_diag > 0.0 {
            1e-8 * mean_diag
        } else {
            1e-8
        };
        log::warn!("kernel solve failed with ridge {ridge:e}; retrying with {next:e}");
        ridge = next;
        retries += 1;
    };
    let scores: Vec<f64> = (&part.theta_u * z).iter().copied().collect();
    let labels = scores
        .iter()
        .map(|&s| if s >= 0.0 { 1.0 } else { -1.0 })
        .collect();
    Ok(Prediction {
        scores,
        labels,
        ridge,
        retries,
        residual,
        cond_est,
    })
}

/// Fraction of positions where the two label vectors agree.
pub fn accuracy(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Writes `node_id score label` lines.
pub fn write_predictions(path: &Path, test_ids: &[usize], prediction: &Prediction) -> Result<()> {
    if test_ids.len() != prediction.scores.len() {
        return Err(Error::LengthMismatch {
            left: test_ids.len(),
            right: prediction.scores.len(),
        });
    }
    let mut out = String::new();
    for ((id, score), label) in test_ids
        .iter()
        .zip(&prediction.scores)
        .zip(&prediction.labels)
    {
        let _ = writeln!(out, "{id} {score:.16e} {label:+}");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
