//! Gaussian expectations of the activation and its derivative.
//!
//! For `f ~ N(0, Σ)` these return `c_σ E[σ(f) σ(f)ᵀ]` and
//! `c_σ E[σ̇(f) σ̇(f)ᵀ]`. ReLU uses the arc-cosine kernels of degree 0 and 1.

use std::f64::consts::PI;

use crate::linalg::{ensure_symmetric, max_abs};
use crate::{Activation, Error, Matrix, Result};

/// Tolerance (relative to the largest entry) for slightly negative variances.
const NEG_DIAG_TOL: f64 = 1e-12;

/// Degree-0 arc-cosine kernel `(π - arccos x) / π`.
pub fn kappa0(x: f64) -> f64 {
    let x = x.clamp(-1.0, 1.0);
    (PI - x.acos()) / PI
}

/// Degree-1 arc-cosine kernel `(x (π - arccos x) + sqrt(1 - x²)) / π`.
pub fn kappa1(x: f64) -> f64 {
    let x = x.clamp(-1.0, 1.0);
    (x * (PI - x.acos()) + (1.0 - x * x).max(0.0).sqrt()) / PI
}

/// Validated, clamped diagonal of a covariance matrix.
fn variances(sigma: &Matrix, what: &str) -> Result<Vec<f64>> {
    ensure_symmetric(sigma, what)?;
    let tol = NEG_DIAG_TOL * max_abs(sigma).max(1.0);
    (0..sigma.nrows())
        .map(|i| {
            let v = sigma[(i, i)];
            if v.is_nan() || v < -tol {
                Err(Error::NegativeDiagonal {
                    what: what.to_string(),
                    index: i,
                    value: v,
                })
            } else {
                Ok(v.max(0.0))
            }
        })
        .collect()
}

/// Correlation `Σ_pq / sqrt(Σ_pp Σ_qq)` clamped to `[-1, 1]`, or `None` when
/// either variance vanishes.
fn correlation(sigma: &Matrix, var: &[f64], p: usize, q: usize) -> Option<(f64, f64)> {
    let scale = (var[p] * var[q]).sqrt();
    if scale > 0.0 {
        Some(((sigma[(p, q)] / scale).clamp(-1.0, 1.0), scale))
    } else {
        None
    }
}

fn symmetric_map(n: usize, mut entry: impl FnMut(usize, usize) -> f64) -> Matrix {
    let mut out = Matrix::zeros(n, n);
    for p in 0..n {
        for q in p..n {
            let v = entry(p, q);
            out[(p, q)] = v;
            out[(q, p)] = v;
        }
    }
    out
}

/// `c_σ E[σ(f) σ(f)ᵀ]`. Zero-variance nodes give zero entries for ReLU.
pub fn activation_second_moment(
    sigma: &Matrix,
    activation: Activation,
    c_sigma: f64,
) -> Result<Matrix> {
    let var = variances(sigma, "covariance")?;
    let n = sigma.nrows();
    Ok(match activation {
        Activation::Linear => symmetric_map(n, |p, q| {
            if p == q {
                c_sigma * var[p]
            } else {
                c_sigma * sigma[(p, q)]
            }
        }),
        Activation::Relu => symmetric_map(n, |p, q| match correlation(sigma, &var, p, q) {
            Some((rho, scale)) => 0.5 * c_sigma * scale * kappa1(rho),
            None => 0.0,
        }),
    })
}

/// `c_σ E[σ̇(f) σ̇(f)ᵀ]`. Zero-variance nodes are treated as uncorrelated,
/// giving `c_σ / 4` for ReLU.
pub fn activation_derivative_moment(
    sigma: &Matrix,
    activation: Activation,
    c_sigma: f64,
) -> Result<Matrix> {
    let var = variances(sigma, "covariance")?;
    let n = sigma.nrows();
    Ok(match activation {
        Activation::Linear => Matrix::from_element(n, n, c_sigma),
        Activation::Relu => symmetric_map(n, |p, q| {
            let rho = correlation(sigma, &var, p, q).map_or(0.0, |(r, _)| r);
            0.5 * c_sigma * kappa0(rho)
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2(a: f64, b: f64, c: f64) -> Matrix {
        Matrix::from_row_slice(2, 2, &[a, c, c, b])
    }

    #[test]
    fn arc_cosine_special_values() {
        assert!((kappa0(0.0) - 0.5).abs() <= 1e-12);
        assert_eq!(kappa0(1.0), 1.0);
        assert_eq!(kappa0(-1.0), 0.0);
        assert!((kappa1(0.0) - 1.0 / PI).abs() <= 1e-12);
        assert_eq!(kappa1(1.0), 1.0);
        assert!(kappa1(-1.0).abs() <= 1e-12);
        assert!(kappa0(1.0 + 1e-12).is_finite());
    }

    #[test]
    fn linear_is_scaled_identity_map() {
        let s = m2(2.0, 2.0, 1.0);
        assert_eq!(
            activation_second_moment(&s, Activation::Linear, 1.0).unwrap(),
            s
        );
        let d = activation_derivative_moment(&s, Activation::Linear, 1.0).unwrap();
        assert!(d.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn relu_examples() {
        let e = activation_second_moment(&m2(1.0, 1.0, 1.0), Activation::Relu, 2.0).unwrap();
        for v in e.iter() {
            assert!((v - 1.0).abs() < 1e-15);
        }
        let e = activation_second_moment(&m2(1.0, 1.0, 0.0), Activation::Relu, 2.0).unwrap();
        assert!((e[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((e[(0, 1)] - 1.0 / PI).abs() < 1e-15);
        assert!((e[(0, 1)] - std::f64::consts::FRAC_1_PI).abs() < 1e-12);

        let d = activation_derivative_moment(&m2(1.0, 1.0, 1.0), Activation::Relu, 2.0).unwrap();
        assert!((d[(0, 1)] - 1.0).abs() < 1e-15);
        let d = activation_derivative_moment(&m2(1.0, 1.0, 0.0), Activation::Relu, 2.0).unwrap();
        assert!((d[(0, 1)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_variance_nodes() {
        let s = m2(0.0, 1.0, 0.0);
        let e = activation_second_moment(&s, Activation::Relu, 2.0).unwrap();
        assert_eq!(e[(0, 0)], 0.0);
        assert_eq!(e[(0, 1)], 0.0);
        let d = activation_derivative_moment(&s, Activation::Relu, 2.0).unwrap();
        assert_eq!(d[(0, 0)], 0.5);
        assert_eq!(d[(0, 1)], 0.5);
        assert!(e.iter().chain(d.iter()).all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_invalid_covariances() {
        let bad = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 1.0]);
        assert!(matches!(
            activation_second_moment(&bad, Activation::Relu, 2.0),
            Err(Error::NotSymmetric(_))
        ));
        let neg = m2(-0.1, 1.0, 0.0);
        assert!(matches!(
            activation_derivative_moment(&neg, Activation::Relu, 2.0),
            Err(Error::NegativeDiagonal { index: 0, .. })
        ));
    }

    #[test]
    fn relu_derivative_entries_bounded() {
        let s = m2(0.3, 2.0, -0.7);
        let d = activation_derivative_moment(&s, Activation::Relu, 2.0).unwrap();
        assert!(d.iter().all(|&v| (0.0..=2.0).contains(&v)));
    }
}
