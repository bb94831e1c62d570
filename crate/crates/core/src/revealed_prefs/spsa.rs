//! Two-measurement simultaneous-perturbation stochastic approximation.
//!
//! Gradient estimate from a single Rademacher direction Delta:
//!
//!   g = [J(x + c_n Delta) - J(x - c_n Delta)] / (2 c_n) * Delta^-1
//!
//! with the standard gain schedules a_n = a / (n + 1 + A)^0.602 and
//! c_n = c / (n + 1)^0.101. Iterates are projected onto x >= lower.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpsaGains {
    pub a: f64,
    pub c: f64,
    pub big_a: f64,
}

impl Default for SpsaGains {
    fn default() -> Self {
        Self { a: 0.1, c: 0.05, big_a: 10.0 }
    }
}

const ALPHA_EXP: f64 = 0.602;
const GAMMA_EXP: f64 = 0.101;

#[derive(Debug, Clone)]
pub struct SpsaResult {
    pub x: Vec<f64>,
    /// Per-iteration objective estimate: the mean of the two measurements.
    pub trace: Vec<f64>,
    /// Set when every measurement came back identical; the initial point
    /// is returned unchanged in that case.
    pub flat_objective: bool,
}

/// Minimize a (possibly noisy) objective with SPSA.
pub fn spsa_minimize(
    mut objective: impl FnMut(&[f64]) -> Result<f64>,
    x0: &[f64],
    lower: f64,
    gains: SpsaGains,
    n_iter: usize,
    seed: u64,
) -> Result<SpsaResult> {
    let dim = x0.len();
    let mut x: Vec<f64> = x0.iter().map(|v| v.max(lower)).collect();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut trace = Vec::with_capacity(n_iter);

    let mut first_value: Option<f64> = None;
    let mut flat = true;

    for n in 0..n_iter {
        let a_n = gains.a / (n as f64 + 1.0 + gains.big_a).powf(ALPHA_EXP);
        let c_n = gains.c / (n as f64 + 1.0).powf(GAMMA_EXP);

        let delta: Vec<f64> = (0..dim)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let x_plus: Vec<f64> = x.iter().zip(&delta).map(|(v, d)| (v + c_n * d).max(lower)).collect();
        let x_minus: Vec<f64> = x.iter().zip(&delta).map(|(v, d)| (v - c_n * d).max(lower)).collect();

        let y_plus = objective(&x_plus)?;
        let y_minus = objective(&x_minus)?;
        for y in [y_plus, y_minus] {
            match first_value {
                None => first_value = Some(y),
                Some(f) if (y - f).abs() > 0.0 => flat = false,
                _ => {}
            }
        }
        trace.push(0.5 * (y_plus + y_minus));

        let scale = (y_plus - y_minus) / (2.0 * c_n);
        for i in 0..dim {
            // Rademacher: 1/delta_i == delta_i.
            x[i] = (x[i] - a_n * scale * delta[i]).max(lower);
        }
    }

    if flat && n_iter > 0 {
        return Ok(SpsaResult {
            x: x0.iter().map(|v| v.max(lower)).collect(),
            trace,
            flat_objective: true,
        });
    }
    Ok(SpsaResult { x, trace, flat_objective: false })
}
