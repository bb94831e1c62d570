//! Sequential Monte-Carlo inverse filter for the linear-Gaussian case.
//!
//! Each particle carries a candidate adversary conditional mean. The
//! proposal uses the structure of the problem: sample the adversary's
//! observation y_k ~ p(y | x_k), propagate the belief deterministically
//! through its Kalman update, then weight by the action likelihood
//! p(a_k | pi_k). Systematic resampling below half the particle count.
//!
//! Per-particle RNG substreams are derived as `seed ^ particle_index`, so
//! results do not depend on evaluation order.

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::psd_sqrt;
use crate::state_space::LinearGaussianModel;

use super::kf::adversary_recursion;
use super::ActionModel;

const RESAMPLE_STREAM_SALT: u64 = 0x853c_49e6_748f_ea9b;

/// Tolerance for the degenerate (sigma_eps^2 = 0) action likelihood.
const EXACT_ACTION_TOL: f64 = 1e-9;

/// Per-step output: weighted mean/covariance of the particle cloud and the
/// effective sample size before any resampling.
#[derive(Debug, Clone)]
pub struct ParticleEstimate {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub ess: f64,
}

/// Run the particle inverse filter over (x_{0:N}, a_{1:N}).
pub fn particle_inverse_filter(
    model: &LinearGaussianModel,
    action: &ActionModel,
    x_seq: &[DVector<f64>],
    a_seq: &[DVector<f64>],
    n_particles: usize,
    seed: u64,
) -> Result<Vec<ParticleEstimate>> {
    if n_particles < 100 {
        return Err(Error::Config("need at least 100 particles".into()));
    }
    let n = a_seq.len();
    if x_seq.len() != n + 1 {
        return Err(Error::Config(format!(
            "state sequence must have {} entries for {} actions",
            n + 1,
            n
        )));
    }
    let x_dim = model.state_dim();
    let y_dim = model.obs_dim();
    let adversary = adversary_recursion(model, n)?;
    let obs_noise_sqrt = psd_sqrt(&model.r);
    let sigma2 = action.action_noise_var;

    let mut rngs: Vec<StdRng> = (0..n_particles)
        .map(|i| StdRng::seed_from_u64(seed ^ i as u64))
        .collect();
    let mut resample_rng = StdRng::seed_from_u64(seed ^ RESAMPLE_STREAM_SALT);

    let mut particles: Vec<DVector<f64>> = vec![model.prior_mean.clone(); n_particles];
    let mut log_weights = vec![0.0f64; n_particles];
    let mut out = Vec::with_capacity(n);

    for k in 0..n {
        let x_next = &x_seq[k + 1];
        let a_obs = &a_seq[k];
        let gain = &adversary.gains[k];
        let phi = action.phi_of(&adversary.covs[k + 1])?;
        let y_mean = &model.c * x_next;

        for (i, particle) in particles.iter_mut().enumerate() {
            let mut z = DVector::<f64>::zeros(y_dim);
            for v in z.iter_mut() {
                *v = StandardNormal.sample(&mut rngs[i]);
            }
            let y = &y_mean + &obs_noise_sqrt * z;
            let pred = &model.a * &*particle;
            *particle = &pred + gain * (y - &model.c * &pred);

            let resid = a_obs - &phi * &*particle;
            log_weights[i] += if sigma2 > 0.0 {
                -0.5 * (x_dim as f64 * (2.0 * std::f64::consts::PI * sigma2).ln()
                    + resid.norm_squared() / sigma2)
            } else if resid.abs().max() < EXACT_ACTION_TOL {
                0.0
            } else {
                f64::NEG_INFINITY
            };
        }

        // Normalize in log space.
        let max_lw = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max_lw.is_finite() {
            return Err(Error::Degeneracy { step: k + 1, ess: 0.0 });
        }
        let mut weights: Vec<f64> = log_weights.iter().map(|lw| (lw - max_lw).exp()).collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let ess = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        if ess < 2.0 {
            return Err(Error::Degeneracy { step: k + 1, ess });
        }

        let mut mean = DVector::<f64>::zeros(x_dim);
        for (w, p) in weights.iter().zip(&particles) {
            mean += p * *w;
        }
        let mut cov = DMatrix::<f64>::zeros(x_dim, x_dim);
        for (w, p) in weights.iter().zip(&particles) {
            let d = p - &mean;
            cov += *w * &d * d.transpose();
        }
        out.push(ParticleEstimate { mean, cov, ess });

        if ess < n_particles as f64 / 2.0 {
            particles = systematic_resample(&particles, &weights, &mut resample_rng);
            log_weights.fill(0.0);
        } else {
            // Keep normalized log-weights to avoid drift.
            for (lw, w) in log_weights.iter_mut().zip(&weights) {
                *lw = w.ln();
            }
        }
    }
    Ok(out)
}

fn systematic_resample(
    particles: &[DVector<f64>],
    weights: &[f64],
    rng: &mut StdRng,
) -> Vec<DVector<f64>> {
    let n = particles.len();
    let step = 1.0 / n as f64;
    let start: f64 = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut idx = 0;
    for i in 0..n {
        let target = start + i as f64 * step;
        while cum < target && idx + 1 < n {
            idx += 1;
            cum += weights[idx];
        }
        out.push(particles[idx].clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inverse_filter::kf::{run_inverse_kf, simulate_with_actions, ProcessNoiseForm};

    #[test]
    fn rejects_tiny_particle_counts() {
        let model = LinearGaussianModel::scalar(0.9, 1.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        let action = ActionModel::identity(0.5).unwrap();
        let x = vec![DVector::zeros(1); 3];
        let a = vec![DVector::zeros(1); 2];
        assert!(particle_inverse_filter(&model, &action, &x, &a, 10, 0).is_err());
    }

    #[test]
    fn tracks_inverse_kf_mean_on_linear_gaussian_instance() {
        let model = LinearGaussianModel::scalar(0.9, 1.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        let action = ActionModel::identity(0.5).unwrap();
        let (traj, actions, _) = simulate_with_actions(&model, &action, 15, 1234).unwrap();
        let kf = run_inverse_kf(&model, &action, &traj.states, &actions, ProcessNoiseForm::default())
            .unwrap();

        let n_seeds = 60;
        let mut avg = vec![0.0f64; 15];
        let mut sq = vec![0.0f64; 15];
        for s in 0..n_seeds {
            // Base seeds are spaced far apart so the per-particle
            // substreams (seed ^ index) never collide across runs.
            let est = particle_inverse_filter(
                &model,
                &action,
                &traj.states,
                &actions,
                400,
                (s as u64) << 32,
            )
            .unwrap();
            for k in 0..15 {
                avg[k] += est[k].mean[0];
                sq[k] += est[k].mean[0] * est[k].mean[0];
            }
        }
        for k in 0..15 {
            let m = avg[k] / n_seeds as f64;
            let var = (sq[k] / n_seeds as f64 - m * m).max(0.0);
            let se = (var / n_seeds as f64).sqrt().max(1e-6);
            let diff = (m - kf[k].est_mean[0]).abs();
            assert!(diff <= 4.0 * se, "step {k}: diff {diff:.4e} vs se {se:.4e}");
        }
    }

    #[test]
    fn degenerate_action_noise_keeps_consistent_particles() {
        // R ~ 0 makes the proposal essentially deterministic, so every
        // particle reproduces the adversary's exact mean and stays
        // consistent with the noiseless action.
        let model = LinearGaussianModel::scalar(0.9, 1.0, 1.0, 1e-20, 0.0, 1.0).unwrap();
        let action = ActionModel::identity(0.0).unwrap();
        let (traj, actions, adv_means) = simulate_with_actions(&model, &action, 10, 5).unwrap();
        let est =
            particle_inverse_filter(&model, &action, &traj.states, &actions, 200, 11).unwrap();
        for k in 0..10 {
            assert!((est[k].mean[0] - adv_means[k][0]).abs() < 1e-6);
            assert!((est[k].ess - 200.0).abs() < 1e-6);
        }
    }

    #[test]
    fn degenerate_action_noise_with_diffuse_proposal_collapses() {
        // With real observation noise no particle matches the exact action.
        let model = LinearGaussianModel::scalar(0.9, 1.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        let action = ActionModel::identity(0.0).unwrap();
        let (traj, actions, _) = simulate_with_actions(&model, &action, 5, 5).unwrap();
        let err = particle_inverse_filter(&model, &action, &traj.states, &actions, 150, 11)
            .unwrap_err();
        assert!(matches!(err, Error::Degeneracy { .. }));
    }

    #[test]
    fn monte_carlo_error_shrinks_with_particle_count() {
        let model = LinearGaussianModel::scalar(0.9, 1.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        let action = ActionModel::identity(0.5).unwrap();
        let (traj, actions, _) = simulate_with_actions(&model, &action, 10, 77).unwrap();

        let sd_of_final = |n_particles: usize| -> f64 {
            let n_seeds = 120;
            let mut vals = Vec::with_capacity(n_seeds);
            for s in 0..n_seeds {
                let est = particle_inverse_filter(
                    &model,
                    &action,
                    &traj.states,
                    &actions,
                    n_particles,
                    (1000 + s as u64) << 32,
                )
                .unwrap();
                vals.push(est[9].mean[0]);
            }
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            (vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (vals.len() - 1) as f64).sqrt()
        };

        let ratio = sd_of_final(200) / sd_of_final(400);
        let expected = 2.0f64.sqrt();
        assert!(
            (ratio - expected).abs() <= 0.2 * expected,
            "sd ratio {ratio:.3} vs sqrt(2)"
        );
    }
}
