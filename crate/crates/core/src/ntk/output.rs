//! Expected product of sigmoid-head derivatives, `E[Φ̇(f) Φ̇(f)ᵀ]`.
//!
//! Each entry uses the fourth-order Taylor expansion of `Φ̇` around 0 applied
//! to the 2×2 covariance `Δ = [[Σ_pp, Σ_pq], [Σ_pq, Σ_qq]]`:
//!
//! ```text
//! 1/4 - (Δ₀₀ + Δ₁₁)/16 + (Δ₀₀Δ₁₁ + 2Δ₀₁²)/64 + (Δ₀₀² + Δ₁₁²)/32
//! ```

use crate::linalg::ensure_symmetric;
use crate::{Matrix, OutputHead, Result};

/// Largest output variance for which the expansion is trusted. Beyond it the
/// factor, and hence the kernel, can be indefinite.
pub const SIGMOID_EXPANSION_LIMIT: f64 = 1.0;

/// Truncated expansion for one pair of nodes.
pub fn sigmoid_factor_entry(var_p: f64, var_q: f64, cov: f64) -> f64 {
    0.25 - (var_p + var_q) / 16.0
        + (var_p * var_q + 2.0 * cov * cov) / 64.0
        + (var_p * var_p + var_q * var_q) / 32.0
}

/// Nominal remainder bound `ε³ / 16` with `ε = max(Δ₀₀, Δ₁₁)`.
pub fn truncation_bound(var_p: f64, var_q: f64) -> f64 {
    var_p.max(var_q).powi(3) / 16.0
}

pub fn sigmoid_output_factor(sigma_last: &Matrix) -> Result<Matrix> {
    ensure_symmetric(sigma_last, "output covariance")?;
    let n = sigma_last.nrows();
    let widest = sigma_last.diagonal().max();
    if n > 0 && widest > SIGMOID_EXPANSION_LIMIT {
        log::warn!(
            "output variance {widest:.3} exceeds {SIGMOID_EXPANSION_LIMIT}; \
             the sigmoid factor expansion may not be positive semidefinite"
        );
    }
    let mut out = Matrix::zeros(n, n);
    for p in 0..n {
        for q in p..n {
            let v =
                sigmoid_factor_entry(sigma_last[(p, p)], sigma_last[(q, q)], sigma_last[(p, q)]);
            out[(p, q)] = v;
            out[(q, p)] = v;
        }
    }
    Ok(out)
}

/// Output factor for `head`: the sigmoid expectation, or all ones.
pub fn output_factor(sigma_last: &Matrix, head: OutputHead) -> Result<Matrix> {
    match head {
        OutputHead::Sigmoid => sigmoid_output_factor(sigma_last),
        OutputHead::Identity => {
            ensure_symmetric(sigma_last, "output covariance")?;
            let n = sigma_last.nrows();
            Ok(Matrix::from_element(n, n, 1.0))
        }
    }
}
