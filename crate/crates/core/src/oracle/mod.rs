//! Finite-width GCNs used as Monte Carlo oracles for the closed-form kernels.
//!
//! [`FiniteWidthNet`] implements the forward pass of all three variants,
//! analytic backpropagation and the per-draw tangent kernel.
//! [`empirical_ntk`] averages the tangent kernel over independent draws,
//! [`norm_preservation_check`] measures per-layer norm ratios at
//! initialization and [`train`] runs full-batch gradient descent on the
//! squared loss. The [`mc`] module holds sampling oracles for the Gaussian
//! expectations that appear in the kernel recursion.

pub mod mc;
mod net;
mod train;

use rayon::prelude::*;

use crate::{ArchitectureSpec, DiffusionOperator, Error, Matrix, Result};

pub use net::{FiniteWidthNet, ForwardTrace, Gradients};
pub use train::{train, TrainConfig, TrainReport};

/// Mean tangent kernel over `samples` independent nets of width `width`.
///
/// Draw `m` uses stream `m` of `seed`, and draws are summed in index order, so
/// the result does not depend on the number of worker threads.
pub fn empirical_ntk(
    arch: &ArchitectureSpec,
    s: &DiffusionOperator,
    x: &Matrix,
    width: usize,
    samples: usize,
    seed: u64,
) -> Result<Matrix> {
    if samples == 0 {
        return Err(Error::InvalidArgument(
            "at least one sample is required".into(),
        ));
    }
    let draws: Vec<Matrix> = (0..samples as u64)
        .into_par_iter()
        .map(|m| {
            FiniteWidthNet::sample_stream(*arch, x.ncols(), width, seed, m)?.tangent_kernel(s, x)
        })
        .collect::<Result<_>>()?;
    let n = s.n();
    let mut total = Matrix::zeros(n, n);
    for d in &draws {
        total += d;
    }
    Ok(total / samples as f64)
}

/// Mean of `‖f_i[r]‖² / h_i` over rows and trials for hidden layers
/// `i = 1..=d`, with `S = I` and unit-norm random inputs of dimension
/// `in_dim`. A norm-preserving `c_σ` keeps every entry near 1.
pub fn norm_preservation_check(
    arch: &ArchitectureSpec,
    in_dim: usize,
    width: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    if trials == 0 {
        return Err(Error::InvalidArgument(
            "at least one trial is required".into(),
        ));
    }
    const ROWS: usize = 4;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut x = Matrix::from_fn(ROWS, in_dim, |_, _| StandardNormal.sample(&mut rng));
    crate::dataset::normalize_rows(&mut x);
    let s = DiffusionOperator::identity(ROWS);
    let per_trial: Vec<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let net = FiniteWidthNet::sample_stream(*arch, in_dim, width, seed, t)?;
            let trace = net.forward(&s, &x)?;
            Ok(trace.f[..arch.depth]
                .iter()
                .map(|f| f.norm_squared() / (ROWS * f.ncols()) as f64)
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut ratios = vec![0.0; arch.depth];
    for trial in &per_trial {
        for (acc, v) in ratios.iter_mut().zip(trial) {
            *acc += v;
        }
    }
    Ok(ratios.into_iter().map(|v| v / trials as f64).collect())
}
