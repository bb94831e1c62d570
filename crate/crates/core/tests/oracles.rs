//! Small-instance brute-force oracles for the inverse likelihood and the
//! finite-state inverse filter.

mod common;

use common::{assert_mixtures_equal, enumerate_belief_mixture, joint_gaussian_action_loglik};
use invcog::identification::inverse_loglik;
use invcog::inverse_filter::{
    inverse_filter_finite, simulate_finite, simulate_with_actions, ActionModel, BeliefMixture,
    FiniteAdversaryModel, PhiKind, PolicyKind,
};
use invcog::state_space::LinearGaussianModel;
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn normalize_rows(m: &mut DMatrix<f64>) {
    for i in 0..m.nrows() {
        let s: f64 = (0..m.ncols()).map(|j| m[(i, j)]).sum();
        for j in 0..m.ncols() {
            m[(i, j)] /= s;
        }
    }
}

#[test]
fn inverse_loglik_matches_joint_gaussian_brute_force() {
    let mut rng = StdRng::seed_from_u64(161);
    for trial in 0..40 {
        let a = rng.random_range(0.3..1.1);
        let c_true = rng.random_range(0.5..2.5);
        let q = rng.random_range(0.3..1.5);
        let r = rng.random_range(0.3..1.5);
        let sigma2 = rng.random_range(0.05..1.0);
        let model = LinearGaussianModel::scalar(a, c_true, q, r, 0.2, 1.0).unwrap();
        let phi = if trial % 3 == 0 { PhiKind::Covariance } else { PhiKind::Identity };
        let action = ActionModel::new(phi, sigma2).unwrap();

        let n = 1 + (trial as usize) % 3; // N in {1, 2, 3}
        let (traj, actions, _) = simulate_with_actions(&model, &action, n, 7000 + trial as u64).unwrap();

        for theta_val in [c_true, 0.8, 1.7] {
            let theta = DMatrix::from_element(1, 1, theta_val);
            let got =
                inverse_loglik(&theta, &traj.states, &actions, &model, &action).unwrap();
            let want =
                joint_gaussian_action_loglik(&theta, &traj.states, &actions, &model, &action);
            assert!(
                (got - want).abs() < 1e-8,
                "trial {trial} N={n} theta={theta_val}: {got} vs {want}"
            );
        }

        // Differences between grid points are convention-free: they must
        // match the oracle's differences exactly as well.
        let at = |v: f64| {
            let theta = DMatrix::from_element(1, 1, v);
            (
                inverse_loglik(&theta, &traj.states, &actions, &model, &action).unwrap(),
                joint_gaussian_action_loglik(&theta, &traj.states, &actions, &model, &action),
            )
        };
        let (g1, w1) = at(0.9);
        let (g2, w2) = at(1.9);
        assert!(((g1 - g2) - (w1 - w2)).abs() < 1e-8);
    }
}

#[test]
fn finite_filter_matches_enumeration_two_state() {
    // X = Y = A = 2, N = 3, no pruning: the mixture is exactly the
    // 2^3-leaf observation tree with Bayes weights.
    let model = FiniteAdversaryModel::new(
        DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.4, 0.6]),
        DMatrix::from_row_slice(2, 2, &[0.8, 0.2, 0.3, 0.7]),
        PolicyKind::MapState,
        DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.2, 0.8]),
    )
    .unwrap();
    let prior = DVector::from_row_slice(&[0.6, 0.4]);
    let trace = simulate_finite(&model, &prior, 3, 13).unwrap();

    let oracle = enumerate_belief_mixture(&model, &prior, &trace.states, &trace.actions);
    let got = inverse_filter_finite(
        &model,
        &BeliefMixture::dirac(prior).unwrap(),
        &trace.states,
        &trace.actions,
        0.0,
        usize::MAX,
    )
    .unwrap();

    for k in 0..3 {
        assert_mixtures_equal(&oracle[k], &got.mixtures[k], 1e-10, k + 1);
        let mut mean = DVector::<f64>::zeros(2);
        for (b, w) in &oracle[k] {
            mean += b * *w;
        }
        assert!((&mean - &got.mean_beliefs[k]).abs().max() < 1e-10);
    }
}

#[test]
fn finite_filter_matches_enumeration_random_three_state() {
    let mut rng = StdRng::seed_from_u64(31337);
    for trial in 0..25 {
        let x = rng.random_range(2..=3);
        let y = rng.random_range(2..=3);
        let act = x; // MAP policy needs one G row per state
        let mut p = DMatrix::from_fn(x, x, |_, _| rng.random_range(0.05..1.0));
        normalize_rows(&mut p);
        let mut b = DMatrix::from_fn(x, y, |_, _| rng.random_range(0.05..1.0));
        normalize_rows(&mut b);
        let mut g = DMatrix::from_fn(x, act, |_, _| rng.random_range(0.05..1.0));
        normalize_rows(&mut g);
        let model = FiniteAdversaryModel::new(p, b, PolicyKind::MapState, g).unwrap();

        let mut prior = DVector::from_fn(x, |_, _| rng.random_range(0.1..1.0));
        prior /= prior.iter().sum::<f64>();

        let n = rng.random_range(2..=4);
        let trace = simulate_finite(&model, &prior, n, 5000 + trial as u64).unwrap();
        let oracle = enumerate_belief_mixture(&model, &prior, &trace.states, &trace.actions);
        let got = inverse_filter_finite(
            &model,
            &BeliefMixture::dirac(prior.clone()).unwrap(),
            &trace.states,
            &trace.actions,
            0.0,
            usize::MAX,
        )
        .unwrap();
        for k in 0..n {
            assert_mixtures_equal(&oracle[k], &got.mixtures[k], 1e-10, k + 1);
        }
    }
}
