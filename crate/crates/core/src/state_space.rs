//! Linear-Gaussian state-space modeling and filtering.
//!
//! State:       x_{k+1} = A x_k + w_k,  w_k ~ N(0, Q),  x_0 ~ N(m0, S0)
//! Observation: y_k     = C x_k + v_k,  v_k ~ N(0, R)
//!
//! Provides trajectory simulation, the classical Kalman measurement/time
//! update, the algebraically equivalent information-filter update, and the
//! discrete-time algebraic Riccati equation solved by fixed-point iteration
//! of the covariance recursion.

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::linalg::{
    check_psd, cholesky_spd, condition_estimate, min_eigenvalue, psd_sqrt, sample_mvn_zero,
    spd_inverse, symmetrize,
};

/// Tolerance used by the PSD invariant checks on constructed covariances.
pub const PSD_TOL: f64 = 1e-9;

/// Convergence threshold for the Riccati fixed-point iteration.
pub const ARE_ITER_TOL: f64 = 1e-10;

/// Maximum residual accepted for a converged Riccati solution.
pub const ARE_RESIDUAL_TOL: f64 = 1e-8;

/// Iteration cap for the Riccati fixed-point iteration.
pub const ARE_MAX_ITER: usize = 100_000;

/// The state-space quadruple (A, C, Q, R) plus the Gaussian prior, shared
/// by the forward (adversary) and inverse filters.
#[derive(Debug, Clone)]
pub struct LinearGaussianModel {
    /// State transition matrix A (X x X).
    pub a: DMatrix<f64>,
    /// Observation matrix C (Y x X).
    pub c: DMatrix<f64>,
    /// State-noise covariance Q (X x X, PSD).
    pub q: DMatrix<f64>,
    /// Observation-noise covariance R (Y x Y, SPD).
    pub r: DMatrix<f64>,
    /// Prior mean of x_0.
    pub prior_mean: DVector<f64>,
    /// Prior covariance of x_0 (PSD).
    pub prior_cov: DMatrix<f64>,
}

impl LinearGaussianModel {
    /// Validate dimensions and covariance invariants.
    pub fn new(
        a: DMatrix<f64>,
        c: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        prior_mean: DVector<f64>,
        prior_cov: DMatrix<f64>,
    ) -> Result<Self> {
        let x = a.nrows();
        if x == 0 || a.ncols() != x {
            return Err(Error::Config("A must be square and nonempty".into()));
        }
        let y = c.nrows();
        if y == 0 || c.ncols() != x {
            return Err(Error::Config(format!("C must be Y x {x} with Y > 0")));
        }
        if q.shape() != (x, x) {
            return Err(Error::Config(format!("Q must be {x} x {x}")));
        }
        if r.shape() != (y, y) {
            return Err(Error::Config(format!("R must be {y} x {y}")));
        }
        if prior_mean.len() != x || prior_cov.shape() != (x, x) {
            return Err(Error::Config(format!("prior must have dimension {x}")));
        }
        for (name, m) in [("A", &a), ("C", &c)] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        check_psd(&q, "Q", PSD_TOL)?;
        check_psd(&r, "R", PSD_TOL)?;
        check_psd(&prior_cov, "prior covariance", PSD_TOL)?;
        if min_eigenvalue(&r) <= 0.0 {
            return Err(Error::Config("R must be strictly positive definite".into()));
        }
        Ok(Self { a, c, q, r, prior_mean, prior_cov })
    }

    /// Scalar convenience constructor (X = Y = 1).
    pub fn scalar(a: f64, c: f64, q: f64, r: f64, prior_mean: f64, prior_var: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, c),
            DMatrix::from_element(1, 1, q),
            DMatrix::from_element(1, 1, r),
            DVector::from_element(1, prior_mean),
            DMatrix::from_element(1, 1, prior_var),
        )
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn obs_dim(&self) -> usize {
        self.c.nrows()
    }

    /// Same model with a different observation matrix (used when profiling
    /// the likelihood of a candidate gain).
    pub fn with_observation_matrix(&self, c: DMatrix<f64>) -> Result<Self> {
        Self::new(
            self.a.clone(),
            c,
            self.q.clone(),
            self.r.clone(),
            self.prior_mean.clone(),
            self.prior_cov.clone(),
        )
    }

    /// Prior as a belief.
    pub fn prior_belief(&self) -> GaussianBelief {
        GaussianBelief { mean: self.prior_mean.clone(), cov: self.prior_cov.clone() }
    }
}

/// Gaussian posterior: mean and covariance.
#[derive(Debug, Clone)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::Config("belief covariance dimension mismatch".into()));
        }
        check_psd(&cov, "belief covariance", PSD_TOL)?;
        Ok(Self { mean, cov })
    }
}

/// A simulated state/observation path. `states` holds x_0..x_N and
/// `observations` holds y_1..y_N, so `states.len() == observations.len() + 1`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub observations: Vec<DVector<f64>>,
    pub seed: u64,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.observations.len()
    }
}

/// Simulate `horizon` steps from the model.
///
/// Draw order is fixed (x_0, then w_k, v_{k+1} per step), so identical
/// `(model, horizon, seed)` yields bit-identical output.
pub fn simulate(model: &LinearGaussianModel, horizon: usize, seed: u64) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be >= 1".into()));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(horizon + 1);
    let mut observations = Vec::with_capacity(horizon);

    let x0 = &model.prior_mean + sample_mvn_zero(&mut rng, &model.prior_cov)?;
    states.push(x0);
    for k in 0..horizon {
        let w = sample_mvn_zero(&mut rng, &model.q)?;
        let x_next = &model.a * &states[k] + w;
        let v = sample_mvn_zero(&mut rng, &model.r)?;
        observations.push(&model.c * &x_next + v);
        states.push(x_next);
    }
    Ok(Trajectory { states, observations, seed })
}

/// One Kalman predict-update cycle: from the posterior at time k and the
/// observation y_{k+1}, produce the posterior at time k+1.
///
/// Also returns the Kalman gain and the innovation covariance
/// S_{k+1} = C P_{k+1|k} C' + R. The covariance update uses the Joseph form
/// (algebraically identical for the optimal gain, numerically stabler) and
/// is symmetrized.
pub fn kalman_step(
    model: &LinearGaussianModel,
    belief: &GaussianBelief,
    y: &DVector<f64>,
) -> Result<(GaussianBelief, DMatrix<f64>, DMatrix<f64>)> {
    let x = model.state_dim();
    if belief.mean.len() != x {
        return Err(Error::Config("belief dimension mismatch".into()));
    }
    if y.len() != model.obs_dim() {
        return Err(Error::Config("observation dimension mismatch".into()));
    }

    let pred_cov = symmetrize(&(&model.a * &belief.cov * model.a.transpose() + &model.q));
    let pred_mean = &model.a * &belief.mean;

    let innov_cov = symmetrize(&(&model.c * &pred_cov * model.c.transpose() + &model.r));
    let chol = cholesky_spd(&innov_cov).map_err(|_| {
        Error::Numerical(format!(
            "innovation covariance numerically singular (condition estimate {:.3e})",
            condition_estimate(&innov_cov)
        ))
    })?;

    // gain = P_pred C' S^-1, computed as (S^-1 (C P_pred))'.
    let gain = chol.solve(&(&model.c * &pred_cov)).transpose();
    let innovation = y - &model.c * &pred_mean;
    let mean = pred_mean + &gain * innovation;

    // Joseph form: (I - KC) P (I - KC)' + K R K'.
    let i_kc = DMatrix::<f64>::identity(x, x) - &gain * &model.c;
    let cov = symmetrize(&(&i_kc * pred_cov * i_kc.transpose() + &gain * &model.r * gain.transpose()));

    Ok((GaussianBelief { mean, cov }, gain, innov_cov))
}

/// Information-filter form of [`kalman_step`]:
///
///   P_{k+1}^-1 = P_{k+1|k}^-1 + C' R^-1 C,    gain = P_{k+1} C' R^-1
///
/// Requires the predicted covariance to be invertible. Agrees with
/// [`kalman_step`] to within numerical round-off.
pub fn information_step(
    model: &LinearGaussianModel,
    belief: &GaussianBelief,
    y: &DVector<f64>,
) -> Result<GaussianBelief> {
    let pred_cov = symmetrize(&(&model.a * &belief.cov * model.a.transpose() + &model.q));
    let pred_mean = &model.a * &belief.mean;

    let pred_info = spd_inverse(&pred_cov)
        .map_err(|_| Error::Numerical("predicted covariance singular in information form".into()))?;
    let r_inv = spd_inverse(&model.r)?;
    let info = symmetrize(&(&pred_info + model.c.transpose() * &r_inv * &model.c));
    let cov = symmetrize(&spd_inverse(&info)?);
    let gain = &cov * model.c.transpose() * &r_inv;
    let mean = &pred_mean + &gain * (y - &model.c * &pred_mean);
    Ok(GaussianBelief { mean, cov })
}

/// Covariance map of the Riccati recursion for the *predicted* covariance:
///
///   f(P) = A (P - P C' (C P C' + R)^-1 C P) A' + Q
pub fn riccati_map(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let s = symmetrize(&(c * p * c.transpose() + r));
    let gain_t = cholesky_spd(&s)?.solve(&(c * p));
    let updated = p - p * c.transpose() * gain_t;
    Ok(symmetrize(&(a * updated * a.transpose() + q)))
}

/// Solve the discrete algebraic Riccati equation for the steady-state
/// predicted covariance, with `probe_q`/`response_r` overriding the model's
/// Q and R (the model supplies A and C).
///
/// Preconditions checked numerically: (A, C) detectable and (A, Q^1/2)
/// stabilizable, via the eigenvalues of A restricted to the unobservable /
/// uncontrollable subspace. Solved by iterating the covariance recursion
/// from P = Q until successive iterates differ by less than
/// [`ARE_ITER_TOL`] in max-abs norm; the converged point must satisfy the
/// equation residual to [`ARE_RESIDUAL_TOL`].
pub fn solve_are(
    model: &LinearGaussianModel,
    probe_q: &DMatrix<f64>,
    response_r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let x = model.state_dim();
    let y = model.obs_dim();
    if probe_q.shape() != (x, x) {
        return Err(Error::Config(format!("probe Q must be {x} x {x}")));
    }
    if response_r.shape() != (y, y) {
        return Err(Error::Config(format!("response R must be {y} x {y}")));
    }
    check_psd(probe_q, "probe Q", PSD_TOL)?;
    check_psd(response_r, "response R", PSD_TOL)?;

    check_subspace_stable(&model.a, &model.c, "detectability of (A, C)")?;
    let q_sqrt = psd_sqrt(probe_q);
    // Stabilizability of (A, Q^1/2) == detectability of (A', Q^1/2').
    check_subspace_stable(&model.a.transpose(), &q_sqrt.transpose(), "stabilizability of (A, Q^1/2)")?;

    let mut p = probe_q.clone();
    let mut converged = false;
    for _ in 0..ARE_MAX_ITER {
        let next = riccati_map(&model.a, &model.c, probe_q, response_r, &p)?;
        let diff = (&next - &p).abs().max();
        p = next;
        if diff < ARE_ITER_TOL {
            converged = true;
            break;
        }
    }
    let residual = (riccati_map(&model.a, &model.c, probe_q, response_r, &p)? - &p).abs().max();
    if !converged || residual >= ARE_RESIDUAL_TOL {
        return Err(Error::Numerical(format!(
            "Riccati iteration did not converge (final residual {residual:.3e})"
        )));
    }
    Ok(p)
}

/// Eigenvalue test: every mode of `a` lying in the null space of the
/// observability matrix of (a, c) must be strictly stable.
fn check_subspace_stable(a: &DMatrix<f64>, c: &DMatrix<f64>, what: &str) -> Result<()> {
    const TOL: f64 = 1e-8;
    let x = a.nrows();
    // Observability matrix [C; CA; ...; CA^{X-1}].
    let mut obs = DMatrix::<f64>::zeros(c.nrows() * x, x);
    let mut block = c.clone();
    for i in 0..x {
        obs.view_mut((i * c.nrows(), 0), (c.nrows(), x)).copy_from(&block);
        block = &block * a;
    }
    let svd = obs.svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, &v| m.max(v));
    let rank = svd.singular_values.iter().filter(|&&v| v > TOL * smax.max(1.0)).count();
    if rank == x {
        return Ok(());
    }
    // Basis N of the unobservable subspace; it is A-invariant, so the
    // restriction of A is M = N' A N in that orthonormal basis.
    let v_t = svd.v_t.as_ref().expect("svd with v requested");
    let null_dim = x - rank;
    let mut basis = DMatrix::<f64>::zeros(x, null_dim);
    for (j, row) in (rank..x).enumerate() {
        for i in 0..x {
            basis[(i, j)] = v_t[(row, i)];
        }
    }
    let restricted = basis.transpose() * a * &basis;
    let unstable = restricted
        .complex_eigenvalues()
        .iter()
        .any(|l| l.norm() >= 1.0 - TOL);
    if unstable {
        return Err(Error::Config(format!(
            "{what} fails: hidden subspace carries a non-stable mode"
        )));
    }
    Ok(())
}
