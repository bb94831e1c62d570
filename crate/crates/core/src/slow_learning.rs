//! Slow learning in cascaded filters and the sequential localization game.
//!
//! Cascade: a static scalar state x_0, a first filter fusing direct
//! measurements y_k = x_0 + v_k with the fed-back estimate of a second
//! filter, and the second filter observing a_k = xhat_k + eps_k. With
//! eps-noise strictly positive the second filter's error decays as
//! O(k^-1/3) instead of O(k^-1): each action carries less and less fresh
//! information as the first filter's gain shrinks. The transition is
//! independent of the eps-noise level.
//!
//! Localization game: neither side knows x_0; at odd instants the
//! adversary measures and acts, and we convert its intercepted action into
//! the effective observation
//!
//!   z_k = a_k / psi_k - (1 - psi_k)/psi_k u_{k-1}
//!       = x_0 + v_k + (1 - psi_k)/psi_k eps_{k-1} + eps_k / psi_k,
//!
//! at even instants we measure x_0 directly. The adversary's gain decays
//! like 2/k, the eavesdropped information is summable, and k Sigma_k -> 2:
//! twice the classical localization covariance.

use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::ols_slope;

/// Prior variance of the unknown scalar state x_0 in both experiments.
pub const PRIOR_VAR: f64 = 1.0;

fn std_normal(rng: &mut StdRng) -> f64 {
    StandardNormal.sample(rng)
}

/// Cascaded-filter experiment configuration.
#[derive(Debug, Clone, Serialize)]
pub struct CascadeConfig {
    /// Variance of the direct measurement y_k = x_0 + v_k.
    pub obs_var: f64,
    /// Variance of the action noise a_k = xhat_k + eps_k.
    pub action_noise_var: f64,
    /// Number of steps K.
    pub horizon: usize,
    /// Monte-Carlo replicates.
    pub n_mc: usize,
    pub seed: u64,
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.obs_var > 0.0) {
            return Err(Error::Config("obs_var must be > 0".into()));
        }
        if !(self.action_noise_var >= 0.0) {
            return Err(Error::Config("action_noise_var must be >= 0".into()));
        }
        if self.horizon < 2 || self.n_mc == 0 {
            return Err(Error::Config("horizon must be >= 2 and n_mc >= 1".into()));
        }
        Ok(())
    }
}

/// Power-law fit of a covariance decay.
#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    /// Fitted slope of log Sigma_k against log k.
    pub exponent: f64,
    pub stderr: f64,
    /// (k_min, k_max), 1-based, inclusive.
    pub fit_range: (usize, usize),
}

/// Cascade output: per-step empirical mean-square error of the second
/// filter (the quantity whose decay rate is of interest) plus the
/// deterministic variance the filters themselves report.
#[derive(Debug, Clone)]
pub struct CascadeResult {
    pub mse: Vec<f64>,
    pub reported_var: Vec<f64>,
}

/// Deterministic gain/variance bookkeeping shared by every replicate.
fn cascade_schedule(config: &CascadeConfig) -> (Vec<f64>, Vec<f64>) {
    let mut gains = Vec::with_capacity(config.horizon);
    let mut reported = Vec::with_capacity(config.horizon);
    let mut precision = 1.0 / PRIOR_VAR;
    for _ in 0..config.horizon {
        let sbar2 = 1.0 / precision;
        let psi = sbar2 / (sbar2 + config.obs_var);
        let noise_var = if config.action_noise_var > 0.0 {
            config.obs_var + config.action_noise_var / (psi * psi)
        } else {
            config.obs_var
        };
        precision += 1.0 / noise_var;
        gains.push(psi);
        reported.push(1.0 / precision);
    }
    (gains, reported)
}

/// Run the two-filter cascade. The reported sequence `mse[k]` is the
/// empirical mean-square error of the second filter's estimate at step
/// k+1, averaged over `n_mc` replicates (the cascade's self-feedback makes
/// internally reported covariances untrustworthy, so the actual error is
/// measured).
pub fn run_cascade(config: &CascadeConfig) -> Result<CascadeResult> {
    config.validate()?;
    let (gains, reported) = cascade_schedule(config);

    let obs_sd = config.obs_var.sqrt();
    let act_sd = config.action_noise_var.sqrt();
    let mut sq_err = vec![0.0f64; config.horizon];
    for rep in 0..config.n_mc {
        let mut rng = StdRng::seed_from_u64(config.seed.wrapping_add(rep as u64));
        let x0: f64 = PRIOR_VAR.sqrt() * std_normal(&mut rng);
        let mut est = 0.0f64; // second filter's estimate of x_0
        let mut precision = 1.0 / PRIOR_VAR;
        for (k, &psi) in gains.iter().enumerate() {
            let v: f64 = std_normal(&mut rng);
            let eps: f64 = std_normal(&mut rng);
            let y = x0 + obs_sd * v;
            // Filter 1 fuses the fed-back prior with the fresh measurement.
            let xhat1 = (1.0 - psi) * est + psi * y;
            let a = xhat1 + act_sd * eps;
            // Filter 2 strips its own contribution back out of the action.
            let z = (a - (1.0 - psi) * est) / psi;
            let noise_var = if config.action_noise_var > 0.0 {
                config.obs_var + config.action_noise_var / (psi * psi)
            } else {
                config.obs_var
            };
            let new_precision = precision + 1.0 / noise_var;
            est = (precision * est + z / noise_var) / new_precision;
            precision = new_precision;
            let e = est - x0;
            sq_err[k] += e * e;
        }
    }
    let mse = sq_err.iter().map(|s| s / config.n_mc as f64).collect();
    Ok(CascadeResult { mse, reported_var: reported })
}

/// Least-squares fit of log Sigma_k on log k over k in [k_min, k_max]
/// (1-based indices into `cov_seq`).
pub fn fit_rate(cov_seq: &[f64], k_min: usize, k_max: usize) -> Result<RateFit> {
    if k_min < 10 {
        return Err(Error::Config("fit range must start at k_min >= 10".into()));
    }
    if k_max > cov_seq.len() || k_min >= k_max {
        return Err(Error::Config(format!(
            "fit range [{k_min}, {k_max}] outside horizon {}",
            cov_seq.len()
        )));
    }
    let mut xs = Vec::with_capacity(k_max - k_min + 1);
    let mut ys = Vec::with_capacity(k_max - k_min + 1);
    for k in k_min..=k_max {
        let v = cov_seq[k - 1];
        if !(v > 0.0) {
            return Err(Error::Data(format!("nonpositive covariance at k = {k}")));
        }
        xs.push((k as f64).ln());
        ys.push(v.ln());
    }
    let (exponent, stderr) = ols_slope(&xs, &ys)?;
    Ok(RateFit { exponent, stderr, fit_range: (k_min, k_max) })
}

/// Which information protocol the localization game runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum GameVariant {
    /// Alternating protocol: odd instants eavesdrop the adversary (full
    /// effective-observation noise including the eps_{k-1} term), even
    /// instants measure directly.
    #[default]
    Full,
    /// Only the effective observation, every instant, with the eps_{k-1}
    /// term omitted: the Bayesian social-learning reduction, which slows
    /// to O(k^-1/3).
    SocialLearning,
}

/// Localization game configuration.
#[derive(Debug, Clone, Serialize)]
pub struct GameConfig {
    pub obs_var: f64,
    pub action_noise_var: f64,
    pub horizon: usize,
    pub n_mc: usize,
    pub seed: u64,
    pub variant: GameVariant,
    /// Model the effective-observation noises as independent with their
    /// marginal variances (they are; the full joint covariance is diagonal
    /// because every primitive noise enters exactly one observation —
    /// verified against dense joint conditioning in tests).
    pub independent_noise_approx: bool,
}

impl GameConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.obs_var > 0.0) {
            return Err(Error::Config("obs_var must be > 0".into()));
        }
        if !(self.action_noise_var > 0.0) {
            return Err(Error::Config("the game requires action_noise_var > 0".into()));
        }
        if self.horizon < 2 || self.n_mc == 0 {
            return Err(Error::Config("horizon must be >= 2 and n_mc >= 1".into()));
        }
        Ok(())
    }
}

/// Per-step observation description for the game's exact conditioning:
/// z = x_0 + sum coeff_i * (unit-variance primitive noise i).
#[derive(Debug, Clone)]
struct NoiseRow {
    /// (primitive noise id, coefficient).
    terms: Vec<(usize, f64)>,
}

impl NoiseRow {
    fn variance(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c * c).sum()
    }
}

/// Deterministic description of the full game: gains and one noise row per
/// effective observation.
struct GameSchedule {
    /// Adversary gain at each odd instant (0 elsewhere).
    gains: Vec<f64>,
    /// One row per time step.
    rows: Vec<NoiseRow>,
}

fn game_schedule(config: &GameConfig) -> Result<GameSchedule> {
    let obs_sd = config.obs_var.sqrt();
    let act_sd = config.action_noise_var.sqrt();
    let mut gains = vec![0.0; config.horizon];
    let mut rows = Vec::with_capacity(config.horizon);
    let mut next_noise_id = 0usize;
    let fresh = |ids: &mut usize| {
        let id = *ids;
        *ids += 1;
        id
    };

    match config.variant {
        GameVariant::Full => {
            // Adversary's own static-filter variance bookkeeping, updated
            // only at its (odd) measurement instants.
            let mut adv_var = PRIOR_VAR;
            for k in 1..=config.horizon {
                if k % 2 == 1 {
                    let psi = adv_var / (adv_var + config.obs_var);
                    if psi <= 1e-14 {
                        return Err(Error::Protocol(format!(
                            "adversary gain vanished at step {k}; cannot divide the action"
                        )));
                    }
                    gains[k - 1] = psi;
                    adv_var *= 1.0 - psi;
                    // z_k noise: (1-psi)/psi eps_{k-1} + v_k + eps_k/psi.
                    let eps_prev = fresh(&mut next_noise_id);
                    let v = fresh(&mut next_noise_id);
                    let eps = fresh(&mut next_noise_id);
                    rows.push(NoiseRow {
                        terms: vec![
                            (eps_prev, (1.0 - psi) / psi * act_sd),
                            (v, obs_sd),
                            (eps, act_sd / psi),
                        ],
                    });
                } else {
                    let v = fresh(&mut next_noise_id);
                    rows.push(NoiseRow { terms: vec![(v, obs_sd)] });
                }
            }
        }
        GameVariant::SocialLearning => {
            // The adversary anchors on our public estimate, so its gain is
            // driven by our posterior variance; only z_k is observed and
            // the eps_{k-1} term is dropped.
            let mut precision = 1.0 / PRIOR_VAR;
            for k in 1..=config.horizon {
                let our_var = 1.0 / precision;
                let psi = our_var / (our_var + config.obs_var);
                if psi <= 1e-14 {
                    return Err(Error::Protocol(format!("gain vanished at step {k}")));
                }
                gains[k - 1] = psi;
                let v = fresh(&mut next_noise_id);
                let eps = fresh(&mut next_noise_id);
                let row = NoiseRow { terms: vec![(v, obs_sd), (eps, act_sd / psi)] };
                precision += 1.0 / row.variance();
                rows.push(row);
            }
        }
    }
    Ok(GameSchedule { gains, rows })
}

/// Localization game output.
#[derive(Debug, Clone)]
pub struct GameResult {
    /// Empirical mean-square error of our estimate of x_0 at each step
    /// (the Monte-Carlo Sigma_k).
    pub mse: Vec<f64>,
    /// Deterministic posterior variance from exact conditioning on all
    /// effective observations (monotone by construction).
    pub conditioning_var: Vec<f64>,
    /// Effective observations z_k from the first replicate, as (k, z_k).
    pub effective_obs: Vec<(usize, f64)>,
}

/// Run the sequential localization game.
pub fn run_localization_game(config: &GameConfig) -> Result<GameResult> {
    config.validate()?;
    let schedule = game_schedule(config)?;

    // Exact conditioning: accumulate precision with each row's noise
    // variance (the joint noise covariance is diagonal; see tests).
    let mut conditioning_var = Vec::with_capacity(config.horizon);
    {
        let mut precision = 1.0 / PRIOR_VAR;
        for row in &schedule.rows {
            precision += 1.0 / row.variance();
            conditioning_var.push(1.0 / precision);
        }
    }

    let obs_sd = config.obs_var.sqrt();
    let act_sd = config.action_noise_var.sqrt();
    let mut sq_err = vec![0.0f64; config.horizon];
    let mut first_rep_z: Vec<(usize, f64)> = Vec::new();

    for rep in 0..config.n_mc {
        let mut rng = StdRng::seed_from_u64(config.seed.wrapping_add(rep as u64));
        let x0: f64 = PRIOR_VAR.sqrt() * std_normal(&mut rng);
        let mut our_mean = 0.0f64;
        let mut precision = 1.0 / PRIOR_VAR;

        match config.variant {
            GameVariant::Full => {
                let mut u_prev = our_mean;
                let mut eps_prev: f64 = act_sd * std_normal(&mut rng);
                for k in 1..=config.horizon {
                    let row = &schedule.rows[k - 1];
                    let z;
                    if k % 2 == 1 {
                        let psi = schedule.gains[k - 1];
                        let v: f64 = obs_sd * std_normal(&mut rng);
                        let eps: f64 = act_sd * std_normal(&mut rng);
                        // Adversary re-anchors on its noisy read of our action.
                        let a_prev = u_prev + eps_prev;
                        let xhat_adv = (1.0 - psi) * a_prev + psi * (x0 + v);
                        let a = xhat_adv + eps;
                        z = a / psi - (1.0 - psi) / psi * u_prev;
                        if rep == 0 {
                            first_rep_z.push((k, z));
                        }
                    } else {
                        let v: f64 = obs_sd * std_normal(&mut rng);
                        z = x0 + v;
                        // Our even-step action; observed by the adversary
                        // with fresh noise at the next odd step.
                        eps_prev = act_sd * std_normal(&mut rng);
                    }
                    let noise_var = row.variance();
                    let new_precision = precision + 1.0 / noise_var;
                    our_mean = (precision * our_mean + z / noise_var) / new_precision;
                    precision = new_precision;
                    if k % 2 == 0 {
                        u_prev = our_mean;
                    }
                    let e = our_mean - x0;
                    sq_err[k - 1] += e * e;
                }
            }
            GameVariant::SocialLearning => {
                let mut u_prev = our_mean;
                for k in 1..=config.horizon {
                    let row = &schedule.rows[k - 1];
                    let psi = schedule.gains[k - 1];
                    let v: f64 = obs_sd * std_normal(&mut rng);
                    let eps: f64 = act_sd * std_normal(&mut rng);
                    let xhat_adv = (1.0 - psi) * u_prev + psi * (x0 + v);
                    let a = xhat_adv + eps;
                    let z = (a - (1.0 - psi) * u_prev) / psi;
                    if rep == 0 {
                        first_rep_z.push((k, z));
                    }
                    let noise_var = row.variance();
                    let new_precision = precision + 1.0 / noise_var;
                    our_mean = (precision * our_mean + z / noise_var) / new_precision;
                    precision = new_precision;
                    u_prev = our_mean;
                    let e = our_mean - x0;
                    sq_err[k - 1] += e * e;
                }
            }
        }
    }

    let mse = sq_err.iter().map(|s| s / config.n_mc as f64).collect();
    Ok(GameResult { mse, conditioning_var, effective_obs: first_rep_z })
}

/// Dense joint-Gaussian conditioning on the first `k` effective
/// observations, building the full noise covariance from the primitive
/// noise decomposition. Quadratic/cubic in k; exists to validate the
/// recursive path (and would remain correct if rows ever shared noises).
#[cfg(test)]
fn dense_conditioning_var(config: &GameConfig, upto: usize) -> Result<f64> {
    use nalgebra::DMatrix;
    let schedule = game_schedule(config)?;
    let k = upto.min(schedule.rows.len());
    let mut noise_cov = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let mut cov = 0.0;
            for &(id_a, ca) in &schedule.rows[i].terms {
                for &(id_b, cb) in &schedule.rows[j].terms {
                    if id_a == id_b {
                        cov += ca * cb;
                    }
                }
            }
            noise_cov[(i, j)] = cov;
        }
    }
    let obs_cov = DMatrix::from_element(k, k, PRIOR_VAR) + noise_cov;
    let ones = DMatrix::from_element(k, 1, PRIOR_VAR);
    let solved = obs_cov
        .cholesky()
        .ok_or_else(|| Error::Numerical("dense conditioning failed".into()))?
        .solve(&ones);
    Ok(PRIOR_VAR - (ones.transpose() * solved)[(0, 0)])
}
