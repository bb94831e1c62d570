//! Afriat feasibility and constructive utility recovery.
//!
//! The dataset is rationalizable by a monotone concave utility iff the
//! system
//!
//!   u_s - u_t - lambda_t alpha_t' (beta_s - beta_t) <= 0   for all t, s
//!
//! with lambda_t >= 1 is feasible, in which case
//! U(beta) = min_t { u_t + lambda_t alpha_t' (beta - beta_t) } rationalizes
//! it. Feasibility is decided by the phase-I simplex; constraints are
//! generated lazily (solve on the active subset, add violated pairs,
//! re-solve) so large datasets do not pay for the full N(N-1) tableau, and
//! the returned certificate is verified against every pairwise inequality.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};

use super::simplex::{phase_one_feasible, LpFeasibility};
use super::ProbeResponseDataset;

/// Scalars (u_t, lambda_t) witnessing rationalizability.
#[derive(Debug, Clone, Serialize)]
pub struct AfriatCertificate {
    pub u: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl AfriatCertificate {
    /// Maximum violation of the Afriat inequalities on `data`.
    pub fn max_violation(&self, data: &ProbeResponseDataset) -> f64 {
        let n = data.len();
        let mut worst = 0.0f64;
        for t in 0..n {
            for s in 0..n {
                if t == s {
                    continue;
                }
                let d = data.expenditure(t, s) - data.expenditure(t, t);
                worst = worst.max(self.u[s] - self.u[t] - self.lambda[t] * d);
            }
        }
        worst
    }
}

/// Decide Afriat feasibility; `Some(certificate)` on success.
pub fn afriat_feasibility(
    data: &ProbeResponseDataset,
    tol: f64,
) -> Result<Option<AfriatCertificate>> {
    let n = data.len();
    if n == 1 {
        return Ok(Some(AfriatCertificate { u: vec![0.0], lambda: vec![1.0] }));
    }

    // d[t][s] = alpha_t' (beta_s - beta_t); constraint u_s - u_t <= lambda_t d.
    let mut d = vec![vec![0.0f64; n]; n];
    for t in 0..n {
        let own = data.expenditure(t, t);
        for s in 0..n {
            d[t][s] = data.expenditure(t, s) - own;
        }
    }

    // Active set: start from the directly-revealed-preferred pairs (d <= 0),
    // the only ones that can bind at u = 0.
    let mut active: Vec<(usize, usize)> = Vec::new();
    let mut in_active = vec![vec![false; n]; n];
    for t in 0..n {
        for s in 0..n {
            if t != s && d[t][s] <= 0.0 {
                active.push((t, s));
                in_active[t][s] = true;
            }
        }
    }

    let add_tol = 1e-10;
    let max_rounds = n * n + 2;
    for round in 0..max_rounds {
        if std::env::var_os("INVCOG_LP_DEBUG").is_some() {
            eprintln!("afriat round {round}: active {}", active.len());
        }
        let x = if active.is_empty() {
            vec![0.0; 3 * n]
        } else {
            // Variables: u+ (n), u- (n), mu = lambda - 1 (n), all >= 0.
            // Row (t, s): u+_s - u-_s - u+_t + u-_t - d mu_t <= d.
            let mut rows = Vec::with_capacity(active.len());
            let mut rhs = Vec::with_capacity(active.len());
            for &(t, s) in &active {
                let mut row = vec![0.0f64; 3 * n];
                row[s] += 1.0;
                row[n + s] -= 1.0;
                row[t] -= 1.0;
                row[n + t] += 1.0;
                row[2 * n + t] -= d[t][s];
                rows.push(row);
                rhs.push(d[t][s]);
            }
            match phase_one_feasible(&rows, &rhs)? {
                LpFeasibility::Infeasible => return Ok(None),
                LpFeasibility::Feasible(x) => x,
            }
        };

        let u: Vec<f64> = (0..n).map(|t| x[t] - x[n + t]).collect();
        let lambda: Vec<f64> = (0..n).map(|t| 1.0 + x[2 * n + t]).collect();
        let cert = AfriatCertificate { u, lambda };

        let mut grew = false;
        for t in 0..n {
            for s in 0..n {
                if t == s || in_active[t][s] {
                    continue;
                }
                if cert.u[s] - cert.u[t] - cert.lambda[t] * d[t][s] > add_tol {
                    active.push((t, s));
                    in_active[t][s] = true;
                    grew = true;
                }
            }
        }
        if !grew {
            let worst = cert.max_violation(data);
            if worst > tol {
                return Err(Error::Numerical(format!(
                    "certificate residual {worst:.3e} exceeds tolerance {tol:.1e}"
                )));
            }
            return Ok(Some(cert));
        }
    }
    Err(Error::Numerical("constraint generation failed to close".into()))
}

/// One affine piece u_t + lambda_t alpha_t' (beta - beta_t).
#[derive(Debug, Clone)]
struct Piece {
    u: f64,
    lambda: f64,
    probe: DVector<f64>,
    base: DVector<f64>,
}

/// Min-of-affine rationalizing utility. Concave (a minimum of affine
/// functions) and strictly increasing (lambda_t > 0, alpha_t > 0).
#[derive(Debug, Clone)]
pub struct ReconstructedUtility {
    pieces: Vec<Piece>,
}

impl ReconstructedUtility {
    pub fn eval(&self, beta: &DVector<f64>) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.u + p.lambda * p.probe.dot(&(beta - &p.base)))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Build the evaluable utility from a certificate.
pub fn reconstruct_utility(
    cert: &AfriatCertificate,
    data: &ProbeResponseDataset,
) -> Result<ReconstructedUtility> {
    let n = data.len();
    if cert.u.len() != n || cert.lambda.len() != n {
        return Err(Error::Config("certificate length does not match dataset".into()));
    }
    if cert.lambda.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Config("certificate multipliers must be positive".into()));
    }
    let pieces = (0..n)
        .map(|t| Piece {
            u: cert.u[t],
            lambda: cert.lambda[t],
            probe: data.probes[t].clone(),
            base: data.responses[t].clone(),
        })
        .collect();
    Ok(ReconstructedUtility { pieces })
}
