//! Maximum-likelihood estimation of the adversary's observation gain.
//!
//! Two likelihoods for a candidate gain theta = C:
//!
//! - classic: prediction-error decomposition of p(y_{1:N} | theta) from the
//!   adversary's own measurements (the baseline an observer of y would use);
//! - inverse: p(a_{1:N} | x_{0:N}, theta) from *our* measurements of the
//!   adversary's actions, via the inverse Kalman filter innovations.
//!
//! Both use the additive constant -(N d / 2) log 2 pi so values are
//! comparable across theta. The inverse surface is much flatter than the
//! classic one; `crb` quantifies this with Monte-Carlo Fisher-information
//! estimates (classic vs. inverse Cramér–Rao bounds).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inverse_filter::{
    adversary_recursion, inverse_kf_params, inverse_kf_step, predicted_action,
    simulate_with_actions, ActionModel, InverseKFState, ProcessNoiseForm,
};
use crate::linalg::{cholesky_spd, spd_log_det};
use crate::state_space::LinearGaussianModel;

const LN_2PI: f64 = 1.8378770664093453;

/// Log-likelihood of the gain grid used for plotting and curvature checks.
#[derive(Debug, Clone, Serialize)]
pub struct LikelihoodProfile {
    pub grid: Vec<f64>,
    pub loglik: Vec<f64>,
    pub argmax: f64,
    /// Negative second difference at the argmax, normalized by the grid
    /// spacing squared.
    pub curvature_at_max: f64,
}

/// Result of a maximum-likelihood search.
#[derive(Debug, Clone, Serialize)]
pub struct MleResult {
    pub theta_hat: f64,
    pub profile: LikelihoodProfile,
    /// Set when the maximum sits on the search boundary.
    pub on_boundary: bool,
}

/// Classic vs. inverse Cramér–Rao bounds at a true scalar gain.
#[derive(Debug, Clone, Serialize)]
pub struct CRBReport {
    pub theta_true: f64,
    pub classic_bound: f64,
    pub inverse_bound: f64,
    pub n_mc: usize,
    pub std_err: BoundStdErr,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundStdErr {
    pub classic: f64,
    pub inverse: f64,
}

/// Log-likelihood of the candidate gain from (x_{0:N}, a_{1:N}).
///
/// Runs the adversary's covariance recursion at gain `theta`, the inverse
/// Kalman filter at the induced parameters, and accumulates the innovation
/// decomposition const - 1/2 sum(log|Sbar_k| + iota' Sbar^-1 iota).
pub fn inverse_loglik(
    theta: &DMatrix<f64>,
    x_seq: &[DVector<f64>],
    a_seq: &[DVector<f64>],
    model: &LinearGaussianModel,
    action: &ActionModel,
) -> Result<f64> {
    let n = a_seq.len();
    if x_seq.len() != n + 1 {
        return Err(Error::Config("state/action sequence length mismatch".into()));
    }
    let candidate = model.with_observation_matrix(theta.clone())?;
    let adversary = adversary_recursion(&candidate, n)?;
    let params = inverse_kf_params(&candidate, action, &adversary, ProcessNoiseForm::default())?;

    let dim = candidate.state_dim() as f64;
    let mut loglik = -0.5 * n as f64 * dim * LN_2PI;
    let mut state = InverseKFState::initial(&candidate);
    for k in 0..n {
        let sp = &params.steps[k];
        let innovation = &a_seq[k] - predicted_action(&state, &x_seq[k + 1], sp);
        let chol = cholesky_spd(&sp.innov_cov)
            .map_err(|_| Error::Numerical(format!("singular innovation covariance at step {}", k + 1)))?;
        let solved = chol.solve(&innovation);
        loglik -= 0.5 * (spd_log_det(&sp.innov_cov)? + innovation.dot(&solved));
        state = inverse_kf_step(&state, &a_seq[k], &x_seq[k + 1], sp)?;
    }
    Ok(loglik)
}

/// Standard prediction-error log-likelihood of y_{1:N} at gain `theta`.
pub fn classic_loglik(
    theta: &DMatrix<f64>,
    y_seq: &[DVector<f64>],
    model: &LinearGaussianModel,
) -> Result<f64> {
    let candidate = model.with_observation_matrix(theta.clone())?;
    let n = y_seq.len();
    let dim = candidate.obs_dim() as f64;
    let mut loglik = -0.5 * n as f64 * dim * LN_2PI;

    let mut mean = candidate.prior_mean.clone();
    let mut cov = candidate.prior_cov.clone();
    for y in y_seq {
        let pred_cov = &candidate.a * &cov * candidate.a.transpose() + &candidate.q;
        let pred_mean = &candidate.a * &mean;
        let innov_cov = &candidate.c * &pred_cov * candidate.c.transpose() + &candidate.r;
        let innovation = y - &candidate.c * &pred_mean;
        let chol = cholesky_spd(&innov_cov)?;
        let solved = chol.solve(&innovation);
        loglik -= 0.5 * (spd_log_det(&innov_cov)? + innovation.dot(&solved));

        let gain = chol.solve(&(&candidate.c * &pred_cov)).transpose();
        mean = &pred_mean + &gain * innovation;
        let x = candidate.state_dim();
        let i_kc = DMatrix::<f64>::identity(x, x) - &gain * &candidate.c;
        cov = &i_kc * pred_cov * i_kc.transpose() + &gain * &candidate.r * gain.transpose();
    }
    Ok(loglik)
}

/// Default grid resolution for [`mle`].
pub const MLE_GRID_POINTS: usize = 64;

/// Maximize a scalar log-likelihood over a compact interval: coarse grid
/// scan followed by golden-section refinement to `|dtheta| < tol`.
///
/// EM is of no use for this model family (the M-step has no closed form),
/// so a derivative-free maximizer is used throughout.
pub fn mle(
    loglik_fn: impl Fn(f64) -> Result<f64>,
    bounds: (f64, f64),
    tol: f64,
) -> Result<MleResult> {
    let (lo, hi) = bounds;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Config("bounds must be a finite interval".into()));
    }
    let tol = if tol > 0.0 { tol } else { 1e-4 };

    let mut grid = Vec::with_capacity(MLE_GRID_POINTS);
    let mut values = Vec::with_capacity(MLE_GRID_POINTS);
    let h = (hi - lo) / (MLE_GRID_POINTS - 1) as f64;
    for i in 0..MLE_GRID_POINTS {
        let theta = lo + h * i as f64;
        let v = loglik_fn(theta)?;
        if !v.is_finite() {
            return Err(Error::Numerical(format!("log-likelihood not finite at {theta}")));
        }
        grid.push(theta);
        values.push(v);
    }
    let best = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();

    let on_boundary = best == 0 || best == MLE_GRID_POINTS - 1;
    let (mut a, mut b) = (
        grid[best.saturating_sub(1)],
        grid[(best + 1).min(MLE_GRID_POINTS - 1)],
    );

    // Golden-section refinement inside the bracketing cell.
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = loglik_fn(c)?;
    let mut fd = loglik_fn(d)?;
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = loglik_fn(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = loglik_fn(d)?;
        }
    }
    let theta_hat = 0.5 * (a + b);

    let curv_idx = best.clamp(1, MLE_GRID_POINTS - 2);
    let curvature_at_max =
        -(values[curv_idx + 1] - 2.0 * values[curv_idx] + values[curv_idx - 1]) / (h * h);

    Ok(MleResult {
        theta_hat,
        profile: LikelihoodProfile {
            argmax: grid[best],
            curvature_at_max,
            grid,
            loglik: values,
        },
        on_boundary,
    })
}

/// Monte-Carlo Cramér–Rao bounds for a scalar gain: the expected Fisher
/// information is estimated as the replicate average of the negative
/// central second difference of each log-likelihood at `theta_true`
/// (step h = 1e-3 max(1, |theta|)); bound = 1 / I_hat, with the standard
/// error of the bound mapped through the reciprocal (delta method).
pub fn crb(
    model: &LinearGaussianModel,
    action: &ActionModel,
    theta_true: f64,
    horizon: usize,
    n_mc: usize,
    seed: u64,
) -> Result<CRBReport> {
    if model.state_dim() != 1 || model.obs_dim() != 1 {
        return Err(Error::Config("crb expects a scalar-gain model".into()));
    }
    if n_mc < 2 {
        return Err(Error::Config("need at least 2 Monte-Carlo replicates".into()));
    }
    let truth = model.with_observation_matrix(DMatrix::from_element(1, 1, theta_true))?;
    let h = 1e-3 * theta_true.abs().max(1.0);
    let thetas = [theta_true - h, theta_true, theta_true + h];

    let mut classic_curv = Vec::with_capacity(n_mc);
    let mut inverse_curv = Vec::with_capacity(n_mc);
    for rep in 0..n_mc {
        let rep_seed = seed.wrapping_add(rep as u64);
        let (traj, actions, _) = simulate_with_actions(&truth, action, horizon, rep_seed)?;

        let mut cl = [0.0f64; 3];
        let mut inv = [0.0f64; 3];
        for (i, &theta) in thetas.iter().enumerate() {
            let th = DMatrix::from_element(1, 1, theta);
            cl[i] = classic_loglik(&th, &traj.observations, model)?;
            inv[i] = inverse_loglik(&th, &traj.states, &actions, model, action)?;
        }
        classic_curv.push(-(cl[2] - 2.0 * cl[1] + cl[0]) / (h * h));
        inverse_curv.push(-(inv[2] - 2.0 * inv[1] + inv[0]) / (h * h));
    }

    let summarize = |curv: &[f64], what: &str| -> Result<(f64, f64)> {
        let n = curv.len() as f64;
        let mean = curv.iter().sum::<f64>() / n;
        if mean <= 0.0 {
            return Err(Error::Numerical(format!(
                "{what} Fisher information estimate nonpositive ({mean:.3e}); increase n_mc or the horizon"
            )));
        }
        let var = curv.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1.0);
        let se_mean = (var / n).sqrt();
        Ok((1.0 / mean, se_mean / (mean * mean)))
    };
    let (classic_bound, classic_se) = summarize(&classic_curv, "classic")?;
    let (inverse_bound, inverse_se) = summarize(&inverse_curv, "inverse")?;

    Ok(CRBReport {
        theta_true,
        classic_bound,
        inverse_bound,
        n_mc,
        std_err: BoundStdErr { classic: classic_se, inverse: inverse_se },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inverse_filter::adversary_recursion;
    use crate::state_space::solve_are;

    fn bench_model() -> LinearGaussianModel {
        LinearGaussianModel::scalar(0.9, 1.5, 1.0, 1.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn inverse_loglik_single_step_is_analytic_gaussian() {
        // One action: a_1 ~ N(Cbar (Abar xhat_0 + Fbar x_1), Cbar psi R psi' Cbar' + sigma^2).
        let model = bench_model();
        let action = ActionModel::identity(0.5).unwrap();
        let (traj, actions, _) = simulate_with_actions(&model, &action, 1, 3).unwrap();
        let theta = model.c.clone();

        let adv = adversary_recursion(&model, 1).unwrap();
        let psi = adv.gains[0][(0, 0)];
        let a_bar = (1.0 - psi * 1.5) * 0.9;
        let f_bar = psi * 1.5;
        let mean = a_bar * 0.0 + f_bar * traj.states[1][0];
        let var = psi * psi * 1.0 + 0.5;
        let resid = actions[0][0] - mean;
        let expected = -0.5 * (LN_2PI + var.ln() + resid * resid / var);

        let got = inverse_loglik(&theta, &traj.states, &actions, &model, &action).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn classic_loglik_single_step_closed_form() {
        let model = bench_model();
        let y = vec![DVector::from_element(1, 0.7)];
        // y_1 ~ N(C A m0, C (A P0 A' + Q) C' + R).
        let var: f64 = 1.5 * 1.5 * (0.81 + 1.0) + 1.0;
        let expected = -0.5 * (LN_2PI + var.ln() + 0.7 * 0.7 / var);
        let got = classic_loglik(&model.c, &y, &model).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn classic_per_sample_loglik_approaches_entropy_rate() {
        // At the true gain, ell/N -> -1/2 (log 2 pi S_inf + 1) where S_inf
        // is the steady-state innovation variance from the Riccati solution.
        let model = bench_model();
        let traj = crate::state_space::simulate(&model, 20_000, 88).unwrap();
        let ll = classic_loglik(&model.c, &traj.observations, &model).unwrap();
        let p_star = solve_are(&model, &model.q, &model.r).unwrap()[(0, 0)];
        let s_inf = 1.5 * 1.5 * p_star + 1.0;
        let rate = -0.5 * (LN_2PI + s_inf.ln() + 1.0);
        assert!(
            (ll / 20_000.0 - rate).abs() < 0.02,
            "{} vs {}",
            ll / 20_000.0,
            rate
        );
    }

    #[test]
    fn mle_recovers_quadratic_vertex() {
        let result = mle(|t| Ok(-(t - 2.3) * (t - 2.3)), (0.0, 5.0), 1e-6).unwrap();
        assert!((result.theta_hat - 2.3).abs() < 1e-5);
        assert!(!result.on_boundary);
        assert!(result.profile.curvature_at_max > 0.0);
    }

    #[test]
    fn mle_flags_boundary_maximum() {
        let result = mle(|t| Ok(t), (0.0, 1.0), 1e-5).unwrap();
        assert!(result.on_boundary);
        assert!(result.theta_hat > 0.95);
    }

    #[test]
    fn mle_is_deterministic() {
        let f = |t: f64| Ok(-(t - 1.0).powi(4) + 0.3 * t);
        let a = mle(f, (0.0, 3.0), 1e-5).unwrap();
        let b = mle(f, (0.0, 3.0), 1e-5).unwrap();
        assert_eq!(a.theta_hat, b.theta_hat);
        assert_eq!(a.profile.loglik, b.profile.loglik);
    }

    #[test]
    fn crb_orders_classic_below_inverse_at_small_scale() {
        let model = bench_model();
        let action = ActionModel::identity(0.5).unwrap();
        let report = crb(&model, &action, 1.5, 300, 40, 12).unwrap();
        assert!(report.classic_bound > 0.0);
        assert!(report.inverse_bound > report.classic_bound);
    }
}
