//! Independent oracles shared by the integration suites. Everything here
//! recomputes expected values from first principles, without touching the
//! implementation paths under test.

use invcog::inverse_filter::{ActionModel, BeliefMixture, FiniteAdversaryModel};
use invcog::state_space::LinearGaussianModel;
use nalgebra::{DMatrix, DVector};

/// Joint-Gaussian brute force for the action log-likelihood
/// log p(a_{1:N} | x_{0:N}, theta): the adversary's conditional mean is a
/// linear-Gaussian chain driven by the known states, so the stacked action
/// vector is one big Gaussian whose mean/covariance we assemble directly.
pub fn joint_gaussian_action_loglik(
    theta: &DMatrix<f64>,
    x_seq: &[DVector<f64>],
    a_seq: &[DVector<f64>],
    model: &LinearGaussianModel,
    action: &ActionModel,
) -> f64 {
    let n = a_seq.len();
    let x_dim = model.state_dim();
    let candidate = model.with_observation_matrix(theta.clone()).unwrap();

    // Adversary covariance recursion (posterior covs and gains).
    let mut covs = vec![candidate.prior_cov.clone()];
    let mut gains = Vec::new();
    for k in 0..n {
        let pred = &candidate.a * &covs[k] * candidate.a.transpose() + &candidate.q;
        let s = &candidate.c * &pred * candidate.c.transpose() + &candidate.r;
        let gain = &pred * candidate.c.transpose() * s.try_inverse().unwrap();
        let post = &pred - &gain * &candidate.c * &pred;
        covs.push(0.5 * (&post + post.transpose()));
        gains.push(gain);
    }

    // Per-step system matrices.
    let identity = DMatrix::<f64>::identity(x_dim, x_dim);
    let mut a_bars = Vec::new();
    let mut f_bars = Vec::new();
    let mut c_bars = Vec::new();
    for k in 0..n {
        a_bars.push((&identity - &gains[k] * &candidate.c) * &candidate.a);
        f_bars.push(&gains[k] * &candidate.c);
        c_bars.push(action.phi_of(&covs[k + 1]).unwrap());
    }

    // Mean of xhat_k (noise-free propagation with the known inputs).
    let mut means = Vec::new();
    let mut mu = candidate.prior_mean.clone();
    for k in 0..n {
        mu = &a_bars[k] * &mu + &f_bars[k] * &x_seq[k + 1];
        means.push(mu.clone());
    }

    // cov(xhat_k, xhat_l) = sum_j M_kj psi_j R psi_j' M_lj',
    // M_kj = Abar_{k-1} ... Abar_j (identity when j = k).
    let chain = |k: usize, j: usize| -> DMatrix<f64> {
        let mut m = DMatrix::<f64>::identity(x_dim, x_dim);
        for i in j..k {
            m = &a_bars[i] * m;
        }
        m
    };
    let mut xcov = vec![vec![DMatrix::<f64>::zeros(x_dim, x_dim); n]; n];
    for k in 1..=n {
        for l in 1..=n {
            let mut cov = DMatrix::<f64>::zeros(x_dim, x_dim);
            for j in 1..=k.min(l) {
                let noise = &gains[j - 1] * &candidate.r * gains[j - 1].transpose();
                cov += chain(k, j) * noise * chain(l, j).transpose();
            }
            xcov[k - 1][l - 1] = cov;
        }
    }

    // Stacked action distribution.
    let dim = n * x_dim;
    let mut mean = DVector::<f64>::zeros(dim);
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for k in 0..n {
        let mk = &c_bars[k] * &means[k];
        for i in 0..x_dim {
            mean[k * x_dim + i] = mk[i];
        }
        for l in 0..n {
            let mut block = &c_bars[k] * &xcov[k][l] * c_bars[l].transpose();
            if k == l {
                block += DMatrix::<f64>::identity(x_dim, x_dim) * action.action_noise_var;
            }
            for i in 0..x_dim {
                for j in 0..x_dim {
                    cov[(k * x_dim + i, l * x_dim + j)] = block[(i, j)];
                }
            }
        }
    }

    let mut stacked = DVector::<f64>::zeros(dim);
    for k in 0..n {
        for i in 0..x_dim {
            stacked[k * x_dim + i] = a_seq[k][i];
        }
    }
    let resid = &stacked - &mean;
    let chol = (0.5 * (&cov + cov.transpose())).cholesky().expect("oracle covariance SPD");
    let solved = chol.solve(&resid);
    let mut logdet = 0.0;
    for i in 0..dim {
        logdet += 2.0 * chol.l()[(i, i)].ln();
    }
    -0.5 * (dim as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + resid.dot(&solved))
}

/// Exhaustive enumeration of all observation sequences y_{1:N} with Bayes
/// weights: the exact mixture the inverse filter must reproduce when run
/// without pruning. Returns, per step, the normalized (belief, weight)
/// atoms in lexicographic y-order.
pub fn enumerate_belief_mixture(
    model: &FiniteAdversaryModel,
    prior: &DVector<f64>,
    x_seq: &[usize],
    a_seq: &[usize],
) -> Vec<Vec<(DVector<f64>, f64)>> {
    let n = a_seq.len();
    let mut out = Vec::with_capacity(n);
    // Frontier of (belief, unnormalized weight) per y-prefix.
    let mut frontier = vec![(prior.clone(), 1.0f64)];
    for k in 0..n {
        let mut next = Vec::with_capacity(frontier.len() * model.n_obs());
        for (belief, w) in &frontier {
            for y in 0..model.n_obs() {
                let obs_lik = model.b[(x_seq[k + 1], y)];
                if obs_lik <= 0.0 {
                    continue;
                }
                let Some(child) = model.hmm_step(belief, y) else { continue };
                let act_lik = model.g_noise[(model.policy.action(&child), a_seq[k])];
                let weight = w * obs_lik * act_lik;
                if weight > 0.0 {
                    next.push((child, weight));
                }
            }
        }
        let total: f64 = next.iter().map(|(_, w)| w).sum();
        assert!(total > 0.0, "oracle: impossible action at step {}", k + 1);
        for atom in &mut next {
            atom.1 /= total;
        }
        out.push(next.clone());
        frontier = next;
    }
    out
}

/// Match two atom lists as measures: every oracle atom must find an
/// implementation atom with the same belief and weight within `tol`.
pub fn assert_mixtures_equal(
    oracle: &[(DVector<f64>, f64)],
    got: &BeliefMixture,
    tol: f64,
    step: usize,
) {
    assert_eq!(oracle.len(), got.atoms.len(), "atom count differs at step {step}");
    let mut used = vec![false; got.atoms.len()];
    for (belief, weight) in oracle {
        let mut found = false;
        for (i, (b, w)) in got.atoms.iter().enumerate() {
            if used[i] {
                continue;
            }
            let dist: f64 = belief.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum();
            if dist < tol && (weight - w).abs() < tol {
                used[i] = true;
                found = true;
                break;
            }
        }
        assert!(found, "unmatched oracle atom at step {step}");
    }
}
