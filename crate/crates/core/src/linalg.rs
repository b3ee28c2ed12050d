//! Small dense helpers shared by the kernel engine, inference and analysis.

use nalgebra::{Cholesky, SymmetricEigen};

use crate::{Error, Matrix, Result};

/// Relative tolerance used when checking that a computed matrix is symmetric.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Relative tolerance for positive semidefiniteness checks.
pub const PSD_TOL: f64 = 1e-8;

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Largest `|m_pq - m_qp|` relative to `max(1, max|m|)`.
pub fn asymmetry(m: &Matrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for p in 0..n {
        for q in (p + 1)..n {
            worst = worst.max((m[(p, q)] - m[(q, p)]).abs());
        }
    }
    worst / max_abs(m).max(1.0)
}

pub fn ensure_square(m: &Matrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::dims(
            what,
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

pub fn ensure_symmetric(m: &Matrix, what: &str) -> Result<()> {
    ensure_square(m, what)?;
    if asymmetry(m) > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(what.to_string()));
    }
    Ok(())
}

/// Replaces `m` with `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut Matrix) {
    let n = m.nrows();
    for p in 0..n {
        for q in (p + 1)..n {
            let v = 0.5 * (m[(p, q)] + m[(q, p)]);
            m[(p, q)] = v;
            m[(q, p)] = v;
        }
    }
}

/// `S · M · Sᵀ`, symmetrized.
pub fn congruence(s: &Matrix, m: &Matrix) -> Matrix {
    let mut out = s * m * s.transpose();
    symmetrize(&mut out);
    out
}

/// Checks `min eig(m) >= -tol · max(1, trace(m)/n)` through a shifted Cholesky.
pub fn is_psd(m: &Matrix, tol: f64) -> bool {
    is_psd_with_slack(m, tol, 0.0)
}

/// As [`is_psd`], additionally tolerating eigenvalues down to `-slack`.
pub fn is_psd_with_slack(m: &Matrix, tol: f64, slack: f64) -> bool {
    let n = m.nrows();
    if n == 0 {
        return true;
    }
    let scale = (m.trace() / n as f64).abs().max(1.0);
    let mut shifted = m.clone();
    for i in 0..n {
        shifted[(i, i)] += 2.0 * tol * scale + slack;
    }
    Cholesky::new(shifted).is_some()
}

/// Symmetric eigendecomposition with eigenpairs sorted by descending eigenvalue.
///
/// Ties keep the order produced by the decomposition, which is deterministic.
pub fn sorted_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    ensure_symmetric(m, "eigendecomposition input")?;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("input contains non-finite entries".into()));
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Matrix::from_fn(m.nrows(), m.nrows(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// All-ones `n × n` matrix.
pub fn ones(n: usize) -> Matrix {
    Matrix::from_element(n, n, 1.0)
}
