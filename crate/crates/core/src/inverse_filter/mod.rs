//! Estimating the adversary's belief from our own state sequence and noisy
//! observations of its actions.
//!
//! Three estimators, all driven by (x_{0:N}, a_{1:N}):
//!
//! - [`kf`]: the inverse Kalman filter for the linear-Gaussian case, where
//!   the adversary's conditional-mean sequence is itself a linear-Gaussian
//!   system with our state as a known exogenous input.
//! - [`finite`]: the exact mixture recursion over the adversary's belief on
//!   finite state spaces (a random measure over the simplex).
//! - [`particle`]: a sequential Monte-Carlo approximation whose proposal
//!   samples the adversary's observation and propagates beliefs
//!   deterministically through its filter.

pub mod finite;
pub mod kf;
pub mod particle;

pub use finite::{simulate_finite, inverse_filter_finite, BeliefMixture, FiniteAdversaryModel, FiniteTrace, InverseFiniteResult, PolicyKind};
pub use kf::{
    adversary_recursion, inverse_kf_params, inverse_kf_step, predicted_action, run_inverse_kf,
    simulate_with_actions, AdversarySequences, InverseKfParams, InverseKfStepParams,
    InverseKFState, ProcessNoiseForm,
};
pub use particle::{particle_inverse_filter, ParticleEstimate};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::spd_inverse;

/// How the adversary's action depends on its posterior: a_k is
/// phi(Sigma_k) applied to its conditional mean, observed in isotropic
/// Gaussian noise of variance `action_noise_var`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiKind {
    /// phi(S) = I: the action is the mean estimate itself.
    Identity,
    /// phi(S) = S.
    Covariance,
    /// phi(S) = S^-1 (requires S strictly positive definite).
    InverseCovariance,
}

#[derive(Debug, Clone, Copy)]
pub struct ActionModel {
    pub phi: PhiKind,
    /// sigma_eps^2 >= 0, applied as sigma_eps^2 * I.
    pub action_noise_var: f64,
}

impl ActionModel {
    pub fn new(phi: PhiKind, action_noise_var: f64) -> Result<Self> {
        if !action_noise_var.is_finite() || action_noise_var < 0.0 {
            return Err(Error::Config("action noise variance must be >= 0".into()));
        }
        Ok(Self { phi, action_noise_var })
    }

    pub fn identity(action_noise_var: f64) -> Result<Self> {
        Self::new(PhiKind::Identity, action_noise_var)
    }

    /// Evaluate phi on the adversary's posterior covariance.
    pub fn phi_of(&self, cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self.phi {
            PhiKind::Identity => Ok(DMatrix::identity(cov.nrows(), cov.ncols())),
            PhiKind::Covariance => Ok(cov.clone()),
            PhiKind::InverseCovariance => spd_inverse(cov)
                .map_err(|_| Error::Numerical("phi = S^-1 requires an SPD covariance".into())),
        }
    }
}
