//! Synthetic radar: ground-truth response generators for the detection
//! experiments. Rational radars maximize a named utility on the budget
//! face; the non-rational control draws uniformly on it.

use nalgebra::DVector;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ProbeResponseDataset;

/// Utility family of a rational radar.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum UtilityKind {
    /// U(beta) = sum w_i log beta_i with positive weights summing to 1.
    CobbDouglas(Vec<f64>),
    /// U(beta) = w' beta with positive weights.
    Linear(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticRadar {
    pub utility_kind: UtilityKind,
    /// When false, responses are drawn uniformly on the budget face
    /// regardless of the utility.
    pub rational: bool,
}

impl SyntheticRadar {
    pub fn new(utility_kind: UtilityKind, rational: bool) -> Result<Self> {
        let weights = match &utility_kind {
            UtilityKind::CobbDouglas(w) | UtilityKind::Linear(w) => w,
        };
        if weights.is_empty() || weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Config("utility weights must be positive".into()));
        }
        if let UtilityKind::CobbDouglas(w) = &utility_kind {
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Config("Cobb-Douglas weights must sum to 1".into()));
            }
        }
        Ok(Self { utility_kind, rational })
    }

    pub fn dim(&self) -> usize {
        match &self.utility_kind {
            UtilityKind::CobbDouglas(w) | UtilityKind::Linear(w) => w.len(),
        }
    }
}

/// Responses to a probe sequence. Rational radars answer with the exact
/// budget-active maximizer; non-rational ones draw uniformly on the
/// budget face (simplex draw pushed through beta_i = u_i / alpha_i).
pub fn generate_radar_responses(
    radar: &SyntheticRadar,
    probes: &[DVector<f64>],
    seed: u64,
) -> Result<ProbeResponseDataset> {
    let m = radar.dim();
    if probes.is_empty() {
        return Err(Error::Config("need at least one probe".into()));
    }
    if probes.iter().any(|a| a.len() != m) {
        return Err(Error::Config("probe dimension does not match utility".into()));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut responses = Vec::with_capacity(probes.len());
    for alpha in probes {
        let beta = if !radar.rational {
            uniform_budget_face(alpha, &mut rng)
        } else {
            match &radar.utility_kind {
                UtilityKind::CobbDouglas(w) => {
                    DVector::from_fn(m, |i, _| w[i] / alpha[i])
                }
                UtilityKind::Linear(w) => {
                    // All budget on the best value-per-cost mode; exact
                    // ties split evenly.
                    let ratios: Vec<f64> = (0..m).map(|i| w[i] / alpha[i]).collect();
                    let best = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let tied: Vec<usize> = (0..m)
                        .filter(|&i| (ratios[i] - best).abs() <= 1e-12 * best.abs())
                        .collect();
                    let share = 1.0 / tied.len() as f64;
                    let mut beta = DVector::zeros(m);
                    for &i in &tied {
                        beta[i] = share / alpha[i];
                    }
                    beta
                }
            }
        };
        responses.push(beta);
    }
    ProbeResponseDataset::new(probes.to_vec(), responses)
}

fn uniform_budget_face(alpha: &DVector<f64>, rng: &mut StdRng) -> DVector<f64> {
    // Uniform on the simplex via normalized exponentials, then mapped to
    // the face alpha' beta = 1.
    let m = alpha.len();
    let mut e = DVector::<f64>::zeros(m);
    let mut total = 0.0;
    for v in e.iter_mut() {
        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        *v = -u.ln();
        total += *v;
    }
    DVector::from_fn(m, |i, _| e[i] / total / alpha[i])
}
