//! Inverse reinforcement learning as a special case of revealed
//! preferences: with finitely many policies and a cost linear in the
//! state-cost vector, optimality of mu* is exactly the system of linear
//! inequalities [H(mu*) - H(mu)] c <= 0.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Check [H(mu*) - H(mu)] c <= tol componentwise for every policy.
pub fn check_irl_inequalities(
    h_matrices: &[DMatrix<f64>],
    optimal_policy_index: usize,
    c: &DVector<f64>,
    tol: f64,
) -> Result<bool> {
    if optimal_policy_index >= h_matrices.len() {
        return Err(Error::Config("optimal policy index out of range".into()));
    }
    let h_opt = &h_matrices[optimal_policy_index];
    if h_opt.ncols() != c.len() {
        return Err(Error::Config("cost vector not conformable with H".into()));
    }
    for h in h_matrices {
        if h.shape() != h_opt.shape() {
            return Err(Error::Config("H matrices must share a shape".into()));
        }
    }
    let opt_cost = h_opt * c;
    Ok(h_matrices
        .iter()
        .all(|h| (&opt_cost - h * c).iter().all(|&v| v <= tol)))
}
