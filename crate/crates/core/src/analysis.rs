//! Depth sweeps and eigenspace alignment between kernels of different depths.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::inference::{accuracy, partition_kernel, predict};
use crate::linalg::{ensure_symmetric, sorted_eigen};
use crate::ntk::{assemble_ntk_with, covariance_forward, KernelStack, NtkForm};
use crate::{ArchitectureSpec, DiffusionOperator, Error, Matrix, NodeDataset, Result, Variant};

/// Default number of leading eigenvectors compared by [`alignment`].
pub const DEFAULT_K: usize = 8;
/// Relative eigengap below which the top-`k` subspace counts as ill-defined.
pub const TIE_GAP: f64 = 1e-10;

/// Top-`k` eigenvectors in descending eigenvalue order, plus a flag that is
/// set when `λ_k − λ_{k+1} < TIE_GAP · |λ_1|`.
pub fn leading_subspace(theta: &Matrix, k: usize) -> Result<(Matrix, bool)> {
    ensure_symmetric(theta, "kernel")?;
    let n = theta.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k must lie in [1, {n}], got {k}"
        )));
    }
    let (values, vectors) = sorted_eigen(theta)?;
    let near_tie = k < n && values[k - 1] - values[k] < TIE_GAP * values[0].abs();
    Ok((vectors.columns(0, k).into_owned(), near_tie))
}

fn subspace_overlap(u: &Matrix, v: &Matrix) -> f64 {
    let k = u.ncols() as f64;
    (u.transpose() * v).norm_squared() / k
}

/// `(1/k) ‖U_iᵀ U_j‖_F²` for the top-`k` eigenvectors of both kernels.
pub fn alignment(theta_i: &Matrix, theta_j: &Matrix, k: usize) -> Result<f64> {
    if theta_i.shape() != theta_j.shape() {
        return Err(Error::dims(
            "alignment operands",
            format!("{}x{}", theta_i.nrows(), theta_i.ncols()),
            format!("{}x{}", theta_j.nrows(), theta_j.ncols()),
        ));
    }
    let (u, _) = leading_subspace(theta_i, k)?;
    let (v, _) = leading_subspace(theta_j, k)?;
    Ok(subspace_overlap(&u, &v))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentGrid {
    pub depths: Vec<usize>,
    pub k: usize,
    /// `a[(i, j)]` aligns depth `depths[i]` with `depths[j]`.
    #[serde(serialize_with = "serialize_rows")]
    pub a: Matrix,
    /// Depths whose top-`k` subspace is ill-defined due to an eigenvalue tie.
    pub near_ties: Vec<usize>,
}

fn serialize_rows<S: serde::Serializer>(
    m: &Matrix,
    ser: S,
) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(ser)
}

impl AlignmentGrid {
    pub fn get(&self, depth_i: usize, depth_j: usize) -> Option<f64> {
        let i = self.depths.iter().position(|&d| d == depth_i)?;
        let j = self.depths.iter().position(|&d| d == depth_j)?;
        Some(self.a[(i, j)])
    }

    /// Depth labels in the first row and column, scores in the body.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("depth");
        for d in &self.depths {
            let _ = write!(out, ",{d}");
        }
        out.push('\n');
        for (i, d) in self.depths.iter().enumerate() {
            let _ = write!(out, "{d}");
            for j in 0..self.depths.len() {
                let _ = write!(out, ",{:.12}", self.a[(i, j)]);
            }
            out.push('\n');
        }
        out
    }
}

fn check_depths(depths: &[usize]) -> Result<()> {
    if depths.is_empty() {
        return Err(Error::InvalidArgument("depth list is empty".into()));
    }
    if depths[0] == 0 {
        return Err(Error::InvalidArgument("depths must be positive".into()));
    }
    if depths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "depths must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Kernels at every requested depth, sharing one forward recursion.
///
/// The depth-`d` forward state is a prefix of the state at the largest depth.
/// If the deep recursion fails, each depth falls back to its own run so that
/// shallow kernels are still produced.
pub fn kernels_at_depths(
    s: &DiffusionOperator,
    x: &Matrix,
    template: &ArchitectureSpec,
    depths: &[usize],
    form: NtkForm,
) -> Result<Vec<Result<KernelStack>>> {
    check_depths(depths)?;
    let deepest = *depths.last().expect("depths checked non-empty");
    let shared = covariance_forward(s, x, &template.with_depth(deepest));
    if let Err(e) = &shared {
        log::warn!("forward recursion to depth {deepest} failed ({e}); running depths separately");
    }
    Ok(depths
        .par_iter()
        .map(|&d| {
            let arch = template.with_depth(d);
            let stack = match &shared {
                Ok(full) => full.truncated(d)?,
                Err(_) => covariance_forward(s, x, &arch)?,
            };
            assemble_ntk_with(stack, s, &arch, form)
        })
        .collect())
}

/// Pairwise alignment of the kernels at `depths`.
pub fn alignment_grid(
    s: &DiffusionOperator,
    x: &Matrix,
    template: &ArchitectureSpec,
    depths: &[usize],
    k: usize,
    form: NtkForm,
) -> Result<AlignmentGrid> {
    let kernels = kernels_at_depths(s, x, template, depths, form)?;
    let subspaces: Vec<(Matrix, bool)> = kernels
        .into_par_iter()
        .map(|stack| leading_subspace(stack?.theta()?, k))
        .collect::<Result<_>>()?;
    let m = depths.len();
    let mut a = Matrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = subspace_overlap(&subspaces[i].0, &subspaces[j].0);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    let near_ties = depths
        .iter()
        .zip(&subspaces)
        .filter(|(_, (_, tie))| *tie)
        .map(|(&d, _)| d)
        .collect::<Vec<_>>();
    if !near_ties.is_empty() {
        log::warn!("eigenvalue ties at leading subspace boundary for depths {near_ties:?}");
    }
    Ok(AlignmentGrid {
        depths: depths.to_vec(),
        k,
        a,
        near_ties,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub variant: Variant,
    pub sigma: crate::Activation,
    pub sigma_s: Option<crate::Activation>,
    pub alpha: Option<f64>,
    pub depth: usize,
    pub accuracy: Option<f64>,
    pub cond_est: Option<f64>,
    pub seconds: Option<f64>,
    pub ridge: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_HEADER: &str = "variant,sigma,sigma_s,alpha,depth,accuracy,cond_est,seconds";

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl SweepResult {
    /// Fixed-header CSV. Failed depths have empty accuracy and condition
    /// fields; the error text is kept in [`SweepRow::error`].
    pub fn to_csv(&self) -> String {
        let mut out = format!("{SWEEP_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.variant.name(),
                r.sigma.name(),
                opt(r.sigma_s.map(|a| a.name())),
                opt(r.alpha),
                r.depth,
                opt(r.accuracy),
                opt(r.cond_est.map(|c| format!("{c:e}"))),
                opt(r.seconds.map(|s| format!("{s:.3}"))),
            );
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SweepOptions {
    /// Overrides the default ridge of every solve.
    pub ridge: Option<f64>,
    pub form: NtkForm,
    /// Record wall-clock seconds per depth. Off by default so that reruns
    /// produce identical files.
    pub timings: bool,
}

/// Builds the kernel and runs kernel regression at every depth.
///
/// Failures at one depth are stored in that row instead of aborting.
pub fn depth_sweep(
    s: &DiffusionOperator,
    data: &NodeDataset,
    template: &ArchitectureSpec,
    depths: &[usize],
    options: SweepOptions,
) -> Result<SweepResult> {
    if data.test_ids().is_empty() {
        return Err(Error::EmptyTestSet);
    }
    if data.train_ids().is_empty() {
        return Err(Error::EmptyLabeledSet);
    }
    template.validate()?;
    let start = Instant::now();
    let kernels = kernels_at_depths(s, data.features(), template, depths, options.form)?;
    let shared_secs = start.elapsed().as_secs_f64() / depths.len() as f64;
    let y_obs = data.y_obs();
    let y_test = data.y_test();
    let rows = kernels
        .into_par_iter()
        .zip(depths.par_iter())
        .map(|(stack, &depth)| {
            let t0 = Instant::now();
            let outcome = stack.and_then(|stack| {
                let theta = stack.theta()?;
                let mut part = partition_kernel(theta, data.train_ids(), data.test_ids())?;
                if let Some(r) = options.ridge {
                    part = part.with_ridge(r)?;
                }
                let pred = predict(&part, &y_obs)?;
                Ok((accuracy(&pred.labels, &y_test)?, pred.cond_est, pred.ridge))
            });
            let seconds = options
                .timings
                .then(|| shared_secs + t0.elapsed().as_secs_f64());
            let mut row = SweepRow {
                variant: template.variant,
                sigma: template.activation,
                sigma_s: template.is_skip().then_some(template.skip_activation),
                alpha: (template.variant == Variant::SkipAlpha).then_some(template.alpha),
                depth,
                accuracy: None,
                cond_est: None,
                seconds,
                ridge: None,
                error: None,
            };
            match outcome {
                Ok((acc, cond, ridge)) => {
                    row.accuracy = Some(acc);
                    row.cond_est = Some(cond);
                    row.ridge = Some(ridge);
                }
                Err(e) => {
                    log::warn!("depth {depth} failed: {e}");
                    row.error = Some(e.to_string());
                }
            }
            row
        })
        .collect();
    Ok(SweepResult { rows })
}

/// `max − min` of the off-diagonal correlations `Σ_pq / √(Σ_pp Σ_qq)`,
/// skipping zero-variance nodes. Zero for fewer than two such nodes.
pub fn correlation_spread(sigma: &Matrix) -> f64 {
    let n = sigma.nrows();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in 0..n {
        for q in (p + 1)..n {
            let denom = (sigma[(p, p)] * sigma[(q, q)]).sqrt();
            if denom > 0.0 {
                let rho = (sigma[(p, q)] / denom).clamp(-1.0, 1.0);
                lo = lo.min(rho);
                hi = hi.max(rho);
            }
        }
    }
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}
