//! Small dense linear-algebra helpers shared across modules.
//!
//! Conventions: covariances are symmetrized after every update, SPD solves
//! go through Cholesky with a single jitter retry, and PSD sampling falls
//! back to a symmetric eigendecomposition when Cholesky fails (rank
//! deficient covariances are legal inputs, e.g. Q = 0).

use nalgebra::linalg::SymmetricEigen;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::rngs::StdRng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Jitter added to the diagonal when a Cholesky factorization fails.
pub const CHOL_JITTER: f64 = 1e-12;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

/// Cholesky of an SPD matrix, retrying once with `CHOL_JITTER * I`.
///
/// The error message carries a condition estimate so callers can surface
/// "numerically singular" diagnostics.
pub fn cholesky_spd(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let sym = symmetrize(m);
    if let Some(c) = sym.clone().cholesky() {
        return Ok(c);
    }
    let n = sym.nrows();
    let jittered = &sym + DMatrix::<f64>::identity(n, n) * CHOL_JITTER;
    if let Some(c) = jittered.cholesky() {
        return Ok(c);
    }
    Err(Error::Numerical(format!(
        "matrix not positive definite (condition estimate {:.3e})",
        condition_estimate(&sym)
    )))
}

/// Solve `M X = B` for SPD `M`.
pub fn spd_solve(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(cholesky_spd(m)?.solve(rhs))
}

/// Inverse of an SPD matrix via Cholesky.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(cholesky_spd(m)?.inverse())
}

/// log-determinant of an SPD matrix via Cholesky.
pub fn spd_log_det(m: &DMatrix<f64>) -> Result<f64> {
    let chol = cholesky_spd(m)?;
    let l = chol.l();
    let mut out = 0.0;
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::Numerical("invalid Cholesky diagonal".into()));
        }
        out += 2.0 * d.ln();
    }
    Ok(out)
}

/// Eigenvalues of the symmetrized matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// |λ|max / |λ|min of the symmetrized matrix; infinite when singular.
pub fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let vals = sym_eigenvalues(m);
    let max = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = vals.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Check `m` is symmetric PSD within `tol` (entrywise symmetry and minimum
/// eigenvalue >= -tol).
pub fn check_psd(m: &DMatrix<f64>, what: &str, tol: f64) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Config(format!("{what} must be square")));
    }
    let asym = (m - m.transpose()).abs().max();
    let scale = m.abs().max().max(1.0);
    if asym > tol * scale {
        return Err(Error::Config(format!("{what} must be symmetric")));
    }
    let min = min_eigenvalue(m);
    if min < -tol * scale {
        return Err(Error::Config(format!(
            "{what} must be positive semidefinite (min eigenvalue {min:.3e})"
        )));
    }
    Ok(())
}

/// Symmetric PSD square root, clamping tiny negative eigenvalues to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let n = m.nrows();
    let mut scaled = eig.eigenvectors.clone();
    for i in 0..n {
        let s = eig.eigenvalues[i].max(0.0).sqrt();
        for r in 0..n {
            scaled[(r, i)] *= s;
        }
    }
    scaled * eig.eigenvectors.transpose()
}

/// Draw `N(0, cov)` for symmetric PSD `cov`.
pub fn sample_mvn_zero(rng: &mut StdRng, cov: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = cov.nrows();
    if cov.ncols() != n {
        return Err(Error::Config("covariance must be square".into()));
    }
    let mut z = DVector::<f64>::zeros(n);
    for i in 0..n {
        z[i] = StandardNormal.sample(rng);
    }
    // Fast path: SPD.
    if let Some(chol) = symmetrize(cov).cholesky() {
        return Ok(chol.l() * z);
    }
    // PSD fallback (rank-deficient covariances are allowed).
    let eig = SymmetricEigen::new(symmetrize(cov));
    let scale = eig.eigenvalues.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    if min < -1e-9 * scale {
        return Err(Error::Numerical(format!(
            "covariance not PSD (min eigenvalue {min:.3e})"
        )));
    }
    let n = cov.nrows();
    let mut a = eig.eigenvectors;
    for i in 0..n {
        let s = eig.eigenvalues[i].max(0.0).sqrt();
        for r in 0..n {
            a[(r, i)] *= s;
        }
    }
    Ok(a * z)
}

/// Ordinary least squares of `y` on `x` with intercept.
///
/// Returns `(slope, slope_stderr)`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    if n != y.len() || n < 3 {
        return Err(Error::Data("need at least 3 points for a slope fit".into()));
    }
    let nf = n as f64;
    let xbar = x.iter().sum::<f64>() / nf;
    let ybar = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - xbar) * (v - xbar)).sum();
    if sxx <= 0.0 {
        return Err(Error::Data("degenerate abscissa in slope fit".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xbar) * (b - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - intercept - slope * a;
            e * e
        })
        .sum();
    let sigma2 = rss / (nf - 2.0);
    Ok((slope, (sigma2 / sxx).sqrt()))
}
