//! Inverse Kalman filter.
//!
//! The adversary runs a Kalman filter on y_k = C x_k + v_k and acts on its
//! conditional mean; we observe a_k = phi(Sigma_k) xhat_k + eps_k.
//! Substituting the observation equation into the adversary's filter shows
//! xhat_k evolves as a linear-Gaussian system driven by our (known) state:
//!
//!   xhat_{k+1} = (I - psi_{k+1} C) A xhat_k + psi_{k+1} C x_{k+1} + psi_{k+1} v_{k+1}
//!   a_k        = phi(Sigma_k) xhat_k + eps_k
//!
//! so estimating xhat_k is ordinary Kalman filtering with the per-step
//! parameters Abar_k = (I - psi_{k+1} C) A, Fbar_k = psi_{k+1} C,
//! Cbar_k = phi(Sigma_k), Qbar_k = psi_{k+1} R psi_{k+1}', Rbar = sigma_eps^2 I.
//! The adversary's covariance/gain sequence is deterministic, so every
//! covariance quantity of ours is precomputed in [`inverse_kf_params`]; the
//! online [`inverse_kf_step`] is O(X^2) mean algebra.

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_spd, condition_estimate, sample_mvn_zero, symmetrize};
use crate::state_space::{simulate, LinearGaussianModel, Trajectory};

use super::ActionModel;

/// Salt for the action-noise RNG stream so it is independent of the
/// trajectory stream under the same experiment seed.
const ACTION_STREAM_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Covariance for the process noise entering the inverse filter.
///
/// The noise term is psi_{k+1} v_{k+1} with cov(v) = R, hence
/// psi R psi' ([`ProcessNoiseForm::GainRGainT`], the default). The
/// alternative forces psi psi' (they coincide when R = I).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ProcessNoiseForm {
    #[default]
    GainRGainT,
    PaperLiteral,
}

/// Deterministic replay of the adversary's Kalman covariance recursion:
/// posterior covariances Sigma_0..Sigma_n and gains psi_1..psi_n.
#[derive(Debug, Clone)]
pub struct AdversarySequences {
    pub covs: Vec<DMatrix<f64>>,
    pub gains: Vec<DMatrix<f64>>,
}

/// Run the adversary's covariance recursion for `n` steps.
pub fn adversary_recursion(model: &LinearGaussianModel, n: usize) -> Result<AdversarySequences> {
    let mut covs = Vec::with_capacity(n + 1);
    let mut gains = Vec::with_capacity(n);
    covs.push(model.prior_cov.clone());
    for k in 0..n {
        let pred = symmetrize(&(&model.a * &covs[k] * model.a.transpose() + &model.q));
        let innov = symmetrize(&(&model.c * &pred * model.c.transpose() + &model.r));
        let gain = cholesky_spd(&innov)?.solve(&(&model.c * &pred)).transpose();
        let x = model.state_dim();
        let i_kc = DMatrix::<f64>::identity(x, x) - &gain * &model.c;
        let post =
            symmetrize(&(&i_kc * &pred * i_kc.transpose() + &gain * &model.r * gain.transpose()));
        covs.push(post);
        gains.push(gain);
    }
    Ok(AdversarySequences { covs, gains })
}

/// Precomputed parameters and covariance quantities for one inverse-KF
/// step (the step producing the estimate of xhat_{k+1}).
#[derive(Debug, Clone)]
pub struct InverseKfStepParams {
    /// Abar_k = (I - psi_{k+1} C) A.
    pub a_bar: DMatrix<f64>,
    /// Fbar_k = psi_{k+1} C (coefficient on the exogenous input x_{k+1}).
    pub f_bar: DMatrix<f64>,
    /// Cbar_{k+1} = phi(Sigma_{k+1}).
    pub c_bar: DMatrix<f64>,
    /// Qbar_k (process noise covariance, see [`ProcessNoiseForm`]).
    pub q_bar: DMatrix<f64>,
    /// Our predicted covariance Sigmabar_{k+1|k}.
    pub pred_cov: DMatrix<f64>,
    /// Our innovation covariance Sbar_{k+1}.
    pub innov_cov: DMatrix<f64>,
    /// Our gain Sigmabar_{k+1|k} Cbar' Sbar^-1.
    pub gain: DMatrix<f64>,
    /// Our posterior covariance Sigmabar_{k+1}.
    pub post_cov: DMatrix<f64>,
    /// Adversary posterior covariance Sigma_{k+1}.
    pub adversary_cov: DMatrix<f64>,
    /// Adversary gain psi_{k+1}.
    pub adversary_gain: DMatrix<f64>,
}

/// Full per-step parameter set for an inverse Kalman filter run.
#[derive(Debug, Clone)]
pub struct InverseKfParams {
    pub steps: Vec<InverseKfStepParams>,
    /// Rbar = sigma_eps^2 I.
    pub r_bar: DMatrix<f64>,
}

/// Build the inverse-KF parameter sequence from the adversary's replayed
/// covariances/gains. Our initial condition is exact (xhat_0 is the known
/// prior mean), so the covariance recursion starts from Sigmabar_0 = 0.
pub fn inverse_kf_params(
    model: &LinearGaussianModel,
    action: &ActionModel,
    adversary: &AdversarySequences,
    noise_form: ProcessNoiseForm,
) -> Result<InverseKfParams> {
    let x = model.state_dim();
    let n = adversary.gains.len();
    if adversary.covs.len() != n + 1 {
        return Err(Error::Config("adversary sequence lengths inconsistent".into()));
    }
    let identity = DMatrix::<f64>::identity(x, x);
    let r_bar = &identity * action.action_noise_var;

    let mut steps = Vec::with_capacity(n);
    let mut our_cov = DMatrix::<f64>::zeros(x, x);
    for k in 0..n {
        let psi = &adversary.gains[k];
        let a_bar = (&identity - psi * &model.c) * &model.a;
        let f_bar = psi * &model.c;
        let c_bar = action.phi_of(&adversary.covs[k + 1])?;
        let q_bar = match noise_form {
            ProcessNoiseForm::GainRGainT => psi * &model.r * psi.transpose(),
            ProcessNoiseForm::PaperLiteral => psi * psi.transpose(),
        };

        let pred_cov = symmetrize(&(&a_bar * &our_cov * a_bar.transpose() + &q_bar));
        let innov_cov = symmetrize(&(&c_bar * &pred_cov * c_bar.transpose() + &r_bar));
        let chol = cholesky_spd(&innov_cov).map_err(|_| {
            Error::Numerical(format!(
                "inverse-filter innovation covariance singular at step {} (condition estimate {:.3e})",
                k + 1,
                condition_estimate(&innov_cov)
            ))
        })?;
        let gain = chol.solve(&(&c_bar * &pred_cov)).transpose();
        let i_kc = &identity - &gain * &c_bar;
        let post_cov =
            symmetrize(&(&i_kc * &pred_cov * i_kc.transpose() + &gain * &r_bar * gain.transpose()));

        our_cov = post_cov.clone();
        steps.push(InverseKfStepParams {
            a_bar,
            f_bar,
            c_bar,
            q_bar,
            pred_cov,
            innov_cov,
            gain,
            post_cov,
            adversary_cov: adversary.covs[k + 1].clone(),
            adversary_gain: psi.clone(),
        });
    }
    Ok(InverseKfParams { steps, r_bar })
}

/// Our running estimate of the adversary's estimate.
#[derive(Debug, Clone)]
pub struct InverseKFState {
    /// Our conditional mean of the adversary's conditional mean xhat_k.
    pub est_mean: DVector<f64>,
    /// Our covariance Sigmabar_k.
    pub est_cov: DMatrix<f64>,
    /// The adversary's (deterministic) posterior covariance Sigma_k.
    pub adversary_cov: DMatrix<f64>,
    /// The adversary's gain psi_k.
    pub adversary_gain: DMatrix<f64>,
}

impl InverseKFState {
    /// Initial state: the adversary's prior mean is public, so our
    /// uncertainty about xhat_0 is zero.
    pub fn initial(model: &LinearGaussianModel) -> Self {
        let x = model.state_dim();
        Self {
            est_mean: model.prior_mean.clone(),
            est_cov: DMatrix::zeros(x, x),
            adversary_cov: model.prior_cov.clone(),
            adversary_gain: DMatrix::zeros(x, model.obs_dim()),
        }
    }
}

/// Predicted action for the coming step: Cbar_{k+1} (Abar_k m + Fbar_k x_{k+1}).
pub fn predicted_action(
    state: &InverseKFState,
    x_next: &DVector<f64>,
    sp: &InverseKfStepParams,
) -> DVector<f64> {
    &sp.c_bar * (&sp.a_bar * &state.est_mean + &sp.f_bar * x_next)
}

/// One inverse-KF step: fold in the observed action a_{k+1} given our state
/// x_{k+1}. All covariance work is precomputed in the step parameters, so
/// this is O(X^2).
pub fn inverse_kf_step(
    state: &InverseKFState,
    a: &DVector<f64>,
    x_next: &DVector<f64>,
    sp: &InverseKfStepParams,
) -> Result<InverseKFState> {
    let x = state.est_mean.len();
    if a.len() != x || x_next.len() != x {
        return Err(Error::Config("inverse-KF step dimension mismatch".into()));
    }
    let pred_mean = &sp.a_bar * &state.est_mean + &sp.f_bar * x_next;
    let innovation = a - &sp.c_bar * &pred_mean;
    let est_mean = pred_mean + &sp.gain * innovation;
    Ok(InverseKFState {
        est_mean,
        est_cov: sp.post_cov.clone(),
        adversary_cov: sp.adversary_cov.clone(),
        adversary_gain: sp.adversary_gain.clone(),
    })
}

/// Run the inverse Kalman filter over a full action sequence.
///
/// `x_seq` holds x_0..x_N, `a_seq` holds a_1..a_N; the returned vector
/// holds our state after each action (k = 1..N).
pub fn run_inverse_kf(
    model: &LinearGaussianModel,
    action: &ActionModel,
    x_seq: &[DVector<f64>],
    a_seq: &[DVector<f64>],
    noise_form: ProcessNoiseForm,
) -> Result<Vec<InverseKFState>> {
    let n = a_seq.len();
    if x_seq.len() != n + 1 {
        return Err(Error::Config(format!(
            "state sequence must have {} entries for {} actions",
            n + 1,
            n
        )));
    }
    let adversary = adversary_recursion(model, n)?;
    let params = inverse_kf_params(model, action, &adversary, noise_form)?;
    let mut state = InverseKFState::initial(model);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        state = inverse_kf_step(&state, &a_seq[k], &x_seq[k + 1], &params.steps[k])?;
        out.push(state.clone());
    }
    Ok(out)
}

/// Simulate a trajectory together with the adversary's filter and its
/// noisy actions a_k = phi(Sigma_k) xhat_k + eps_k.
///
/// Returns the trajectory, the action sequence a_1..a_N and the
/// adversary's conditional means xhat_1..xhat_N.
pub fn simulate_with_actions(
    model: &LinearGaussianModel,
    action: &ActionModel,
    horizon: usize,
    seed: u64,
) -> Result<(Trajectory, Vec<DVector<f64>>, Vec<DVector<f64>>)> {
    let traj = simulate(model, horizon, seed)?;
    let adversary = adversary_recursion(model, horizon)?;

    let x = model.state_dim();
    let eps_cov = DMatrix::<f64>::identity(x, x) * action.action_noise_var;
    let mut rng = StdRng::seed_from_u64(seed ^ ACTION_STREAM_SALT);

    let mut means = Vec::with_capacity(horizon);
    let mut actions = Vec::with_capacity(horizon);
    let mut mean = model.prior_mean.clone();
    for k in 0..horizon {
        let pred = &model.a * &mean;
        mean = &pred + &adversary.gains[k] * (&traj.observations[k] - &model.c * &pred);
        let phi = action.phi_of(&adversary.covs[k + 1])?;
        let eps = sample_mvn_zero(&mut rng, &eps_cov)?;
        actions.push(&phi * &mean + eps);
        means.push(mean.clone());
    }
    Ok((traj, actions, means))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inverse_filter::PhiKind;

    #[test]
    fn params_blind_adversary_reduce_to_prior_dynamics() {
        // C = 0: psi = 0, so Abar = A, Fbar = 0, Qbar = 0.
        let model = LinearGaussianModel::new(
            DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.0, 0.8]),
            DMatrix::zeros(1, 2),
            DMatrix::identity(2, 2),
            DMatrix::from_element(1, 1, 1.0),
            DVector::zeros(2),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let action = ActionModel::identity(0.5).unwrap();
        let adv = adversary_recursion(&model, 3).unwrap();
        let params =
            inverse_kf_params(&model, &action, &adv, ProcessNoiseForm::default()).unwrap();
        for sp in &params.steps {
            assert!((&sp.a_bar - &model.a).abs().max() < 1e-14);
            assert!(sp.f_bar.abs().max() < 1e-14);
            assert!(sp.q_bar.abs().max() < 1e-14);
        }
    }

    #[test]
    fn params_scalar_direct_substitution() {
        // Sigma_0 = 1, Q = 0, A = C = R = 1 gives psi_1 = 0.5.
        let model = LinearGaussianModel::scalar(1.0, 1.0, 0.0, 1.0, 0.0, 1.0).unwrap();
        let action = ActionModel::identity(0.1).unwrap();
        let adv = adversary_recursion(&model, 1).unwrap();
        assert!((adv.gains[0][(0, 0)] - 0.5).abs() < 1e-14);
        let params =
            inverse_kf_params(&model, &action, &adv, ProcessNoiseForm::default()).unwrap();
        let sp = &params.steps[0];
        assert!((sp.a_bar[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((sp.f_bar[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((sp.q_bar[(0, 0)] - 0.25).abs() < 1e-14);
        // Paper-literal form: psi psi' = 0.25 as well since R = 1.
        let lit = inverse_kf_params(&model, &action, &adv, ProcessNoiseForm::PaperLiteral).unwrap();
        assert!((lit.steps[0].q_bar[(0, 0)] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn params_replay_adversary_mean_dynamics_exactly() {
        // The parameterized system Abar/Fbar driven by (x, v) must replay
        // the adversary's own Kalman mean recursion.
        let model = LinearGaussianModel::new(
            DMatrix::from_row_slice(2, 2, &[0.9, 0.2, -0.1, 0.7]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.5]),
            DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.1, 0.3]),
            DMatrix::from_element(1, 1, 0.8),
            DVector::from_row_slice(&[0.5, -0.5]),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let n = 40;
        let traj = simulate(&model, n, 17).unwrap();
        let adv = adversary_recursion(&model, n).unwrap();
        let action = ActionModel::identity(1.0).unwrap();
        let params =
            inverse_kf_params(&model, &action, &adv, ProcessNoiseForm::default()).unwrap();

        // Adversary's own filter.
        let mut mean = model.prior_mean.clone();
        let mut replay = model.prior_mean.clone();
        for k in 0..n {
            let pred = &model.a * &mean;
            mean = &pred + &adv.gains[k] * (&traj.observations[k] - &model.c * &pred);

            let v = &traj.observations[k] - &model.c * &traj.states[k + 1];
            replay = &params.steps[k].a_bar * &replay
                + &adv.gains[k] * &v
                + &params.steps[k].f_bar * &traj.states[k + 1];

            assert!(
                (&mean - &replay).abs().max() < 1e-10,
                "replay diverged at step {k}"
            );
        }
    }

    #[test]
    fn noiseless_identity_action_recovers_adversary_mean() {
        let model = LinearGaussianModel::scalar(0.9, 1.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        let action = ActionModel::identity(0.0).unwrap();
        let (traj, actions, adv_means) = simulate_with_actions(&model, &action, 200, 42).unwrap();
        let states =
            run_inverse_kf(&model, &action, &traj.states, &actions, ProcessNoiseForm::default())
                .unwrap();
        for (k, st) in states.iter().enumerate() {
            assert!(
                (&st.est_mean - &adv_means[k]).abs().max() < 1e-12,
                "mismatch at step {k}"
            );
        }
    }

    #[test]
    fn huge_action_noise_reduces_to_unforced_prediction() {
        let model = LinearGaussianModel::scalar(0.9, 1.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        let action = ActionModel::identity(1e12).unwrap();
        let n = 30;
        let (traj, actions, _) = simulate_with_actions(&model, &action, n, 9).unwrap();
        let adv = adversary_recursion(&model, n).unwrap();
        let params =
            inverse_kf_params(&model, &action, &adv, ProcessNoiseForm::default()).unwrap();
        let states =
            run_inverse_kf(&model, &action, &traj.states, &actions, ProcessNoiseForm::default())
                .unwrap();

        // Pure propagation of the exact initial condition, no updates.
        let mut mean = model.prior_mean.clone();
        let mut cov = DMatrix::<f64>::zeros(1, 1);
        for k in 0..n {
            let sp = &params.steps[k];
            mean = &sp.a_bar * &mean + &sp.f_bar * &traj.states[k + 1];
            cov = &sp.a_bar * &cov * sp.a_bar.transpose() + &sp.q_bar;
            assert!((&states[k].est_mean - &mean).abs().max() < 1e-6);
            assert!((&states[k].est_cov - &cov).abs().max() < 1e-6 * cov.abs().max().max(1.0));
        }
    }

    #[test]
    fn time_averaged_error_matches_steady_state_covariance() {
        // Monte-Carlo self-consistency: E (xhathat - xhat)^2 ~= steady Sigmabar.
        let model = LinearGaussianModel::scalar(0.9, 1.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        let action = ActionModel::identity(0.5).unwrap();
        let n = 10_000;
        let (traj, actions, adv_means) = simulate_with_actions(&model, &action, n, 7).unwrap();
        let states =
            run_inverse_kf(&model, &action, &traj.states, &actions, ProcessNoiseForm::default())
                .unwrap();
        let burn = 100;
        let mse: f64 = (burn..n)
            .map(|k| {
                let e = states[k].est_mean[0] - adv_means[k][0];
                e * e
            })
            .sum::<f64>()
            / (n - burn) as f64;
        let steady = states[n - 1].est_cov[(0, 0)];
        assert!(
            (mse - steady).abs() < 0.05 * steady,
            "mse {mse:.5} vs steady covariance {steady:.5}"
        );
    }

    #[test]
    fn inverse_covariance_phi_is_supported() {
        let model = LinearGaussianModel::scalar(0.9, 1.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        let action = ActionModel::new(PhiKind::InverseCovariance, 0.3).unwrap();
        let (traj, actions, _) = simulate_with_actions(&model, &action, 20, 3).unwrap();
        let states =
            run_inverse_kf(&model, &action, &traj.states, &actions, ProcessNoiseForm::default())
                .unwrap();
        assert_eq!(states.len(), 20);
        assert!(states.iter().all(|s| s.est_mean[0].is_finite()));
    }
}
