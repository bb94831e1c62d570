//! Optimal inverse filter on finite state spaces.
//!
//! The adversary runs an HMM filter pi_k = T(pi_{k-1}, y_k) and emits an
//! action index a_k ~ G[u(pi_k)]. Our posterior over its belief,
//! alpha_k(pi) = p(pi_k | a_{1:k}, x_{0:k}), is a weighted point-mass set:
//! each atom pi spawns one child T(pi, y) per observation y, weighted by
//! B[x_{k+1}, y] and reweighted by the likelihood of the observed action,
//! then the set is merged/pruned and renormalized.

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};

/// Row-stochasticity tolerance for model validation.
const STOCHASTIC_TOL: f64 = 1e-12;

/// Default L1 merge tolerance for mixture atoms.
pub const DEFAULT_PRUNE_TOL: f64 = 1e-6;

/// Default cap on the number of mixture atoms.
pub const DEFAULT_MAX_ATOMS: usize = 10_000;

/// Deterministic map from the adversary's belief to its action index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// u = argmax_x pi(x), ties resolved to the lowest index.
    MapState,
    /// Always the same action (an adversary that reveals nothing).
    Constant(usize),
}

impl PolicyKind {
    pub fn action(&self, belief: &DVector<f64>) -> usize {
        match *self {
            PolicyKind::MapState => {
                let mut best = 0;
                for i in 1..belief.len() {
                    if belief[i] > belief[best] {
                        best = i;
                    }
                }
                best
            }
            PolicyKind::Constant(u) => u,
        }
    }
}

/// Finite-state adversary: our Markov chain P, its sensor B, its policy,
/// and the action-confusion matrix G (row u: p(a | u)).
#[derive(Debug, Clone)]
pub struct FiniteAdversaryModel {
    pub p: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub policy: PolicyKind,
    pub g_noise: DMatrix<f64>,
}

fn check_row_stochastic(m: &DMatrix<f64>, what: &str) -> Result<()> {
    for i in 0..m.nrows() {
        let mut sum = 0.0;
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if !(v >= 0.0) {
                return Err(Error::Config(format!("{what} row {i} has a negative entry")));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::Config(format!("{what} row {i} sums to {sum}, expected 1")));
        }
    }
    Ok(())
}

impl FiniteAdversaryModel {
    pub fn new(
        p: DMatrix<f64>,
        b: DMatrix<f64>,
        policy: PolicyKind,
        g_noise: DMatrix<f64>,
    ) -> Result<Self> {
        let x = p.nrows();
        if x == 0 || p.ncols() != x {
            return Err(Error::Config("P must be square and nonempty".into()));
        }
        if b.nrows() != x || b.ncols() == 0 {
            return Err(Error::Config("B must have one row per state".into()));
        }
        check_row_stochastic(&p, "P")?;
        check_row_stochastic(&b, "B")?;
        check_row_stochastic(&g_noise, "G")?;
        let u_count = g_noise.nrows();
        match policy {
            PolicyKind::MapState if u_count < x => {
                return Err(Error::Config(format!(
                    "MAP policy emits up to {x} actions but G has {u_count} rows"
                )))
            }
            PolicyKind::Constant(u) if u >= u_count => {
                return Err(Error::Config(format!("constant action {u} out of range")))
            }
            _ => {}
        }
        Ok(Self { p, b, policy, g_noise })
    }

    pub fn n_states(&self) -> usize {
        self.p.nrows()
    }

    pub fn n_obs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_actions(&self) -> usize {
        self.g_noise.ncols()
    }

    /// HMM filter update T(pi, y). Returns `None` when the observation has
    /// zero likelihood under the predicted belief.
    pub fn hmm_step(&self, belief: &DVector<f64>, y: usize) -> Option<DVector<f64>> {
        let x = self.n_states();
        let mut next = DVector::<f64>::zeros(x);
        let mut norm = 0.0;
        for j in 0..x {
            let mut pred = 0.0;
            for i in 0..x {
                pred += self.p[(i, j)] * belief[i];
            }
            let v = self.b[(j, y)] * pred;
            next[j] = v;
            norm += v;
        }
        if norm <= 0.0 {
            return None;
        }
        next /= norm;
        Some(next)
    }
}

/// Weighted point-mass set over beliefs (our posterior over the
/// adversary's posterior).
#[derive(Debug, Clone)]
pub struct BeliefMixture {
    /// (belief on the simplex, nonnegative weight); weights sum to 1.
    pub atoms: Vec<(DVector<f64>, f64)>,
}

impl BeliefMixture {
    pub fn new(atoms: Vec<(DVector<f64>, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Config("mixture must have at least one atom".into()));
        }
        for (belief, w) in &atoms {
            if *w < 0.0 {
                return Err(Error::Config("mixture weights must be nonnegative".into()));
            }
            let sum: f64 = belief.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL || belief.iter().any(|&v| v < -STOCHASTIC_TOL) {
                return Err(Error::Config("mixture atom not on the simplex".into()));
            }
        }
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Config(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(Self { atoms })
    }

    /// Point mass at a single belief.
    pub fn dirac(belief: DVector<f64>) -> Result<Self> {
        Self::new(vec![(belief, 1.0)])
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w).sum()
    }

    /// Posterior mean belief E[pi].
    pub fn mean_belief(&self) -> DVector<f64> {
        let dim = self.atoms[0].0.len();
        let mut out = DVector::<f64>::zeros(dim);
        for (belief, w) in &self.atoms {
            out += belief * *w;
        }
        out
    }
}

/// Output of [`inverse_filter_finite`]: the mixture and its mean belief at
/// every step.
#[derive(Debug, Clone)]
pub struct InverseFiniteResult {
    pub mixtures: Vec<BeliefMixture>,
    pub mean_beliefs: Vec<DVector<f64>>,
}

/// Run the exact mixture recursion over observed actions.
///
/// `x_seq` holds our true state indices x_0..x_N, `a_seq` the observed
/// action indices a_1..a_N. Atoms closer than `prune_tol` in L1 are
/// merged (weight-accumulated onto the first representative) and at most
/// `max_atoms` atoms are kept, dropping the lightest.
pub fn inverse_filter_finite(
    model: &FiniteAdversaryModel,
    prior: &BeliefMixture,
    x_seq: &[usize],
    a_seq: &[usize],
    prune_tol: f64,
    max_atoms: usize,
) -> Result<InverseFiniteResult> {
    let n = a_seq.len();
    if x_seq.len() != n + 1 {
        return Err(Error::Config(format!(
            "state sequence must have {} entries for {} actions",
            n + 1,
            n
        )));
    }
    if max_atoms == 0 {
        return Err(Error::Config("max_atoms must be positive".into()));
    }
    if x_seq.iter().any(|&x| x >= model.n_states()) {
        return Err(Error::Config("state index out of range".into()));
    }
    if a_seq.iter().any(|&a| a >= model.n_actions()) {
        return Err(Error::Config("action index out of range".into()));
    }

    let mut current = prior.clone();
    let mut mixtures = Vec::with_capacity(n);
    let mut mean_beliefs = Vec::with_capacity(n);

    for k in 0..n {
        let x_next = x_seq[k + 1];
        let a_obs = a_seq[k];

        let mut children: Vec<(DVector<f64>, f64)> = Vec::new();
        for (belief, w) in &current.atoms {
            for y in 0..model.n_obs() {
                let obs_lik = model.b[(x_next, y)];
                if obs_lik <= 0.0 {
                    continue;
                }
                let Some(child) = model.hmm_step(belief, y) else {
                    continue;
                };
                let act_lik = model.g_noise[(model.policy.action(&child), a_obs)];
                let weight = w * obs_lik * act_lik;
                if weight <= 0.0 {
                    continue;
                }
                merge_atom(&mut children, child, weight, prune_tol);
            }
        }

        let total: f64 = children.iter().map(|(_, w)| w).sum();
        if total <= 0.0 {
            return Err(Error::Inconsistent {
                step: k + 1,
                what: "observed action has zero likelihood under every belief".into(),
            });
        }

        if children.len() > max_atoms {
            children.sort_by(|a, b| b.1.total_cmp(&a.1));
            children.truncate(max_atoms);
        }
        let kept: f64 = children.iter().map(|(_, w)| w).sum();
        for atom in &mut children {
            atom.1 /= kept;
        }

        current = BeliefMixture { atoms: children };
        mean_beliefs.push(current.mean_belief());
        mixtures.push(current.clone());
    }

    Ok(InverseFiniteResult { mixtures, mean_beliefs })
}

fn merge_atom(
    atoms: &mut Vec<(DVector<f64>, f64)>,
    belief: DVector<f64>,
    weight: f64,
    prune_tol: f64,
) {
    if prune_tol > 0.0 {
        for (rep, w) in atoms.iter_mut() {
            let dist: f64 = rep.iter().zip(belief.iter()).map(|(a, b)| (a - b).abs()).sum();
            if dist < prune_tol {
                *w += weight;
                return;
            }
        }
    }
    atoms.push((belief, weight));
}

/// A simulated run of the finite-state model: our chain, the adversary's
/// observations, beliefs, clean actions u_k and noisy actions a_k.
#[derive(Debug, Clone)]
pub struct FiniteTrace {
    /// x_0..x_N.
    pub states: Vec<usize>,
    /// y_1..y_N (the adversary's observations).
    pub observations: Vec<usize>,
    /// pi_1..pi_N.
    pub beliefs: Vec<DVector<f64>>,
    /// u_1..u_N.
    pub clean_actions: Vec<usize>,
    /// a_1..a_N.
    pub actions: Vec<usize>,
}

fn sample_categorical(rng: &mut StdRng, weights: impl Iterator<Item = f64>) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        cum += w;
        last = i;
        if u < cum {
            return i;
        }
    }
    last
}

/// Simulate the finite model forward for `horizon` steps.
pub fn simulate_finite(
    model: &FiniteAdversaryModel,
    prior: &DVector<f64>,
    horizon: usize,
    seed: u64,
) -> Result<FiniteTrace> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be >= 1".into()));
    }
    let x_dim = model.n_states();
    if prior.len() != x_dim {
        return Err(Error::Config("prior dimension mismatch".into()));
    }
    let mut rng = StdRng::seed_from_u64(seed);

    let mut states = Vec::with_capacity(horizon + 1);
    states.push(sample_categorical(&mut rng, prior.iter().copied()));
    let mut observations = Vec::with_capacity(horizon);
    let mut beliefs = Vec::with_capacity(horizon);
    let mut clean_actions = Vec::with_capacity(horizon);
    let mut actions = Vec::with_capacity(horizon);

    let mut belief = prior.clone();
    for k in 0..horizon {
        let x_prev = states[k];
        let x_next = sample_categorical(&mut rng, (0..x_dim).map(|j| model.p[(x_prev, j)]));
        states.push(x_next);
        let y = sample_categorical(&mut rng, (0..model.n_obs()).map(|j| model.b[(x_next, j)]));
        observations.push(y);
        belief = model
            .hmm_step(&belief, y)
            .ok_or_else(|| Error::Inconsistent { step: k + 1, what: "zero-likelihood draw".into() })?;
        beliefs.push(belief.clone());
        let u = model.policy.action(&belief);
        clean_actions.push(u);
        let a = sample_categorical(&mut rng, (0..model.n_actions()).map(|j| model.g_noise[(u, j)]));
        actions.push(a);
    }
    Ok(FiniteTrace { states, observations, beliefs, clean_actions, actions })
}
