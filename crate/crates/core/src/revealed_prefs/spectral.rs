//! Spectral probe/response extraction and the Riccati budget link.
//!
//! The probe is the spectrum of the state-noise covariance Q (signal
//! incentive per mode) and the response is the spectrum of R^-1 (precision
//! resource per mode). Under the SNR budget alpha' beta <= 1 the
//! steady-state tracking precision is bounded: Sigma*^-1 <= Sigmabar^-1,
//! and more resources never hurt accuracy.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, spd_inverse, sym_eigenvalues};
use crate::state_space::{solve_are, LinearGaussianModel};

/// Cap used to realize beta_i = 0 (no resources => effectively infinite
/// measurement noise on that mode).
const NO_RESOURCE_NOISE: f64 = 1e12;

/// Eigenvalues of Q (descending) and of R^-1 (descending).
pub fn spectral_extract(q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    if q.nrows() != q.ncols() || r.nrows() != r.ncols() {
        return Err(Error::Config("Q and R must be square".into()));
    }
    let q_min = min_eigenvalue(q);
    if q_min < -1e-9 * q.abs().max().max(1.0) {
        return Err(Error::Config("Q must be positive semidefinite".into()));
    }
    let r_eigs = sym_eigenvalues(r); // ascending
    if r_eigs[0] <= 0.0 {
        return Err(Error::Numerical("R is singular; cannot take its inverse spectrum".into()));
    }
    let mut q_eigs = sym_eigenvalues(q);
    q_eigs.reverse(); // descending
    let alpha = DVector::from_vec(q_eigs.into_iter().map(|v| v.max(0.0)).collect());
    // Reciprocals of R's ascending eigenvalues are R^-1's descending ones.
    let beta = DVector::from_vec(r_eigs.into_iter().map(|v| 1.0 / v).collect());
    Ok((alpha, beta))
}

/// Diagonal realizations Q(alpha) = diag(alpha), R(beta) = diag(1/beta);
/// beta_i = 0 maps to the large-noise proxy.
pub fn diagonal_realization(alpha: &DVector<f64>, beta: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if alpha.len() != beta.len() {
        return Err(Error::Config("alpha and beta must have equal length".into()));
    }
    if alpha.iter().any(|&v| v < 0.0) || beta.iter().any(|&v| v < 0.0) {
        return Err(Error::Config("spectra must be nonnegative".into()));
    }
    let m = alpha.len();
    let q = DMatrix::from_fn(m, m, |i, j| if i == j { alpha[i] } else { 0.0 });
    let r = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            if beta[i] > 1.0 / NO_RESOURCE_NOISE { 1.0 / beta[i] } else { NO_RESOURCE_NOISE }
        } else {
            0.0
        }
    });
    Ok((q, r))
}

/// Steady-state predicted covariance for the diagonal spectral
/// realization at (alpha, beta), using the model's (A, C).
pub fn spectral_are_solution(
    model: &LinearGaussianModel,
    alpha: &DVector<f64>,
    beta: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let (q, r) = diagonal_realization(alpha, beta)?;
    solve_are(model, &q, &r)
}

/// Verify the budget link: when alpha' beta <= 1, the steady-state
/// precision is bounded by the supplied reference (Sigma*^-1 <=
/// Sigmabar^-1 as an eigenvalue test on the difference), and increasing
/// any single beta_i never increases any eigenvalue of Sigma*.
pub fn verify_budget_link(
    model: &LinearGaussianModel,
    alpha: &DVector<f64>,
    beta: &DVector<f64>,
    sigma_bar: &DMatrix<f64>,
) -> Result<bool> {
    const TOL: f64 = 1e-8;
    let sigma_star = spectral_are_solution(model, alpha, beta)?;

    if alpha.dot(beta) <= 1.0 + TOL {
        let bound_info = spd_inverse(sigma_bar)?;
        let star_info = spd_inverse(&sigma_star)?;
        if min_eigenvalue(&(&bound_info - &star_info)) < -TOL {
            return Ok(false);
        }
    }

    // Monotonicity: more resources on any mode can only shrink the
    // spectrum of the achieved covariance.
    let base_eigs = sym_eigenvalues(&sigma_star);
    for i in 0..beta.len() {
        let mut bumped = beta.clone();
        bumped[i] = if bumped[i] > 0.0 { bumped[i] * 1.25 } else { 0.05 };
        let bumped_eigs = sym_eigenvalues(&spectral_are_solution(model, alpha, &bumped)?);
        for (b, o) in bumped_eigs.iter().zip(&base_eigs) {
            if *b > *o + 1e-9 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn diagonal_spectra_come_out_sorted() {
        let q = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let r = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 2.0]);
        let (alpha, beta) = spectral_extract(&q, &r).unwrap();
        assert_eq!(alpha.as_slice(), &[3.0, 1.0]);
        assert_eq!(beta.as_slice(), &[2.0, 0.5]);
    }

    #[test]
    fn inverse_then_decompose_commutes() {
        let mut rng = StdRng::seed_from_u64(55);
        for _ in 0..20 {
            let l = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
            let r = &l * l.transpose() + DMatrix::identity(3, 3) * 0.2;
            let (_, beta) = spectral_extract(&DMatrix::identity(3, 3), &r).unwrap();
            let r_inv = spd_inverse(&r).unwrap();
            let mut direct = sym_eigenvalues(&r_inv);
            direct.reverse();
            for (a, b) in beta.iter().zip(&direct) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn singular_r_is_rejected() {
        let q = DMatrix::identity(2, 2);
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(spectral_extract(&q, &r), Err(Error::Numerical(_))));
    }

    #[test]
    fn more_resources_tighten_the_scalar_fixed_point() {
        let model = LinearGaussianModel::scalar(1.0, 1.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        let alpha = DVector::from_element(1, 1.0);
        let lo = spectral_are_solution(&model, &alpha, &DVector::from_element(1, 0.5)).unwrap();
        let hi = spectral_are_solution(&model, &alpha, &DVector::from_element(1, 1.0)).unwrap();
        assert!(hi[(0, 0)] < lo[(0, 0)]);
    }

    #[test]
    fn zero_resources_hit_the_prediction_only_ceiling() {
        // beta = 0: R ~ 1e12, so the update is useless and the fixed point
        // approaches the solution of P = A P A' + Q (here A=0.9 => Q/(1-A^2)).
        let model = LinearGaussianModel::scalar(0.9, 1.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        let alpha = DVector::from_element(1, 1.0);
        let p = spectral_are_solution(&model, &alpha, &DVector::from_element(1, 0.0)).unwrap();
        let ceiling = 1.0 / (1.0 - 0.81);
        assert!((p[(0, 0)] - ceiling).abs() < 1e-3 * ceiling);
    }

    #[test]
    fn harder_target_weakly_inflates_the_spectrum() {
        let model = LinearGaussianModel::new(
            DMatrix::from_row_slice(2, 2, &[0.95, 0.0, 0.0, 0.9]),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let alpha = DVector::from_row_slice(&[0.8, 0.4]);
        let beta = DVector::from_row_slice(&[0.6, 0.9]);
        let base = sym_eigenvalues(&spectral_are_solution(&model, &alpha, &beta).unwrap());
        let harder = sym_eigenvalues(
            &spectral_are_solution(&model, &(2.0 * &alpha), &beta).unwrap(),
        );
        for (h, b) in harder.iter().zip(&base) {
            assert!(*h >= *b - 1e-9);
        }
    }

    #[test]
    fn budget_link_holds_on_scalar_instances() {
        let model = LinearGaussianModel::scalar(1.0, 1.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        let alpha = DVector::from_element(1, 1.0);
        // Reference: the full-resource point beta = 1/alpha dominates every
        // budget-feasible beta.
        let sigma_bar = spectral_are_solution(&model, &alpha, &DVector::from_element(1, 1.0)).unwrap();
        for beta in [0.3, 0.5, 1.0] {
            assert!(verify_budget_link(
                &model,
                &alpha,
                &DVector::from_element(1, beta),
                &sigma_bar
            )
            .unwrap());
        }
    }
}
