//! Statistical detection of utility maximization from noisy responses,
//! and SPSA optimization of the probes to sharpen it.
//!
//! The test statistic is the minimum infinity-norm perturbation r* of the
//! observed responses that brings the dataset inside the GARP polytope
//! (r* = 0 iff the data already passes). The threshold is the empirical
//! (1-gamma)-quantile of r* over Monte-Carlo draws of rational datasets at
//! the same noise level, so the Type-I rate is gamma by construction.

use nalgebra::DVector;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};

use super::garp::check_garp;
use super::radar::{generate_radar_responses, SyntheticRadar, UtilityKind};
use super::spsa::{spsa_minimize, SpsaGains};
use super::{ProbeResponseDataset, GARP_TOL};

const H0_STREAM_SALT: u64 = 0xd1b5_4a32_d192_ed03;
const OBJECTIVE_STREAM_SALT: u64 = 0x94d0_49bb_1331_11eb;

/// Accept or reject the rationality hypothesis H0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Decision {
    AcceptH0,
    RejectH0,
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectionResult {
    /// Minimum perturbation radius r* (infinity norm on responses).
    pub statistic: f64,
    /// Empirical (1-gamma)-quantile of r* under H0.
    pub threshold: f64,
    pub decision: Decision,
    pub p_value_estimate: f64,
    /// Set when the bisection hit its radius cap; the statistic is then
    /// reported as that cap.
    pub overflow: bool,
}

/// Minimum perturbation radius: smallest r such that responses within
/// an r-box (intersected with the nonnegative orthant) of the observed
/// ones pass GARP.
///
/// Exact box-grid search for N <= 3, m <= 2; a violation-driven repair
/// heuristic otherwise (the grid oracle is the test reference for it).
/// Returns (r, overflow).
pub fn minimum_perturbation(data: &ProbeResponseDataset, tol: f64) -> (f64, bool) {
    if check_garp(data, tol).passes {
        return (0.0, false);
    }
    // All boxes overlap once r reaches half the largest per-coordinate
    // spread; a common point passes GARP trivially.
    let m = data.dim();
    let mut r_max = 0.0f64;
    for i in 0..m {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for b in &data.responses {
            lo = lo.min(b[i]);
            hi = hi.max(b[i]);
        }
        r_max = r_max.max(0.5 * (hi - lo));
    }
    r_max += 1e-9;

    let feasible = |r: f64| -> bool {
        if data.len() <= 3 && m <= 2 {
            grid_feasible(data, r, tol)
        } else {
            repair_feasible(data, r, tol)
        }
    };

    if !feasible(r_max) {
        // The box-overlap argument makes this unreachable for the exact
        // search; a heuristic failure is reported as an overflow.
        return (r_max, true);
    }
    let mut lo = 0.0f64;
    let mut hi = r_max;
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (hi, false)
}

/// Exhaustive per-coordinate grid over the r-box around each response.
fn grid_feasible(data: &ProbeResponseDataset, r: f64, tol: f64) -> bool {
    const GRID: usize = 5;
    let n = data.len();
    let m = data.dim();
    let coords = n * m;
    let mut idx = vec![0usize; coords];
    let mut candidate = data.clone();
    loop {
        for c in 0..coords {
            let (obs, dim) = (c / m, c % m);
            let z = data.responses[obs][dim];
            let lo = (z - r).max(0.0);
            let hi = z + r;
            candidate.responses[obs][dim] = lo + (hi - lo) * idx[c] as f64 / (GRID - 1) as f64;
        }
        if check_garp(&candidate, tol).passes {
            return true;
        }
        let mut c = 0;
        loop {
            if c == coords {
                return false;
            }
            idx[c] += 1;
            if idx[c] < GRID {
                break;
            }
            idx[c] = 0;
            c += 1;
        }
    }
}

/// Violation-driven repair: while a revealed-preference chain t -> ... -> s
/// strictly prefers beta_s to beta_t, push alpha_s' beta_s down and
/// alpha_s' beta_t up by the cheapest coordinate moves available inside
/// the r-box.
fn repair_feasible(data: &ProbeResponseDataset, r: f64, tol: f64) -> bool {
    let n = data.len();
    let m = data.dim();
    let mut candidate = data.clone();
    let max_fix = 4 * n + 16;
    for _ in 0..max_fix {
        let result = check_garp(&candidate, tol);
        if result.passes {
            return true;
        }
        let cycle = result.violating_cycle.expect("failing GARP carries a cycle");
        let t = cycle[0];
        let s = *cycle.last().expect("cycle nonempty");

        // Strict violation: alpha_s' beta_s > alpha_s' beta_t + tol.
        // Required decrease of the gap, plus margin to clear the tolerance.
        let gap = candidate.probes[s].dot(&candidate.responses[s])
            - candidate.probes[s].dot(&candidate.responses[t]);
        let mut need = gap + 10.0 * tol;

        // Cheapest first: lower beta_s toward its box floor.
        need -= lower_expenditure(
            &candidate.probes[s].clone(),
            &mut candidate.responses[s],
            &data.responses[s],
            r,
            need,
        );
        if need > 0.0 {
            // Then raise beta_t toward its box ceiling.
            need -= raise_expenditure(
                &candidate.probes[s].clone(),
                &mut candidate.responses[t],
                &data.responses[t],
                r,
                need,
            );
        }
        if need > 1e-15 {
            return false;
        }
        let _ = m;
    }
    false
}

/// Decrease alpha' beta by up to `want` by moving beta down inside
/// [max(z - r, 0), z + r]; returns the decrease achieved.
fn lower_expenditure(
    alpha: &DVector<f64>,
    beta: &mut DVector<f64>,
    z: &DVector<f64>,
    r: f64,
    want: f64,
) -> f64 {
    let m = alpha.len();
    let mut achieved = 0.0;
    // Two passes: a uniform proportional move, then mop up on coordinates
    // with slack left.
    for _ in 0..2 {
        let remaining = want - achieved;
        if remaining <= 0.0 {
            break;
        }
        let free: Vec<usize> = (0..m)
            .filter(|&i| beta[i] > (z[i] - r).max(0.0) + 1e-15)
            .collect();
        if free.is_empty() {
            break;
        }
        let rate: f64 = free.iter().map(|&i| alpha[i]).sum();
        let step = remaining / rate;
        for &i in &free {
            let floor = (z[i] - r).max(0.0);
            let move_i = step.min(beta[i] - floor);
            beta[i] -= move_i;
            achieved += alpha[i] * move_i;
        }
    }
    achieved
}

/// Increase alpha' beta by up to `want` by moving beta up inside the box.
fn raise_expenditure(
    alpha: &DVector<f64>,
    beta: &mut DVector<f64>,
    z: &DVector<f64>,
    r: f64,
    want: f64,
) -> f64 {
    let m = alpha.len();
    let mut achieved = 0.0;
    for _ in 0..2 {
        let remaining = want - achieved;
        if remaining <= 0.0 {
            break;
        }
        let free: Vec<usize> = (0..m).filter(|&i| beta[i] < z[i] + r - 1e-15).collect();
        if free.is_empty() {
            break;
        }
        let rate: f64 = free.iter().map(|&i| alpha[i]).sum();
        let step = remaining / rate;
        for &i in &free {
            let ceil = z[i] + r;
            let move_i = step.min(ceil - beta[i]);
            beta[i] += move_i;
            achieved += alpha[i] * move_i;
        }
    }
    achieved
}

/// Empirical (1-gamma)-quantile of r* over `n_mc` rational datasets at the
/// given probes and noise level (random Cobb-Douglas weights per draw).
pub fn calibrate_threshold(
    probes: &[DVector<f64>],
    noise_sigma: f64,
    gamma: f64,
    n_mc: usize,
    seed: u64,
) -> Result<f64> {
    let stats = h0_statistics(probes, noise_sigma, n_mc, seed)?;
    let mut sorted = stats;
    sorted.sort_by(|a, b| a.total_cmp(b));
    let rank = ((1.0 - gamma) * n_mc as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, n_mc) - 1])
}

fn h0_statistics(
    probes: &[DVector<f64>],
    noise_sigma: f64,
    n_mc: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if probes.is_empty() {
        return Err(Error::Config("need probes to calibrate against".into()));
    }
    let m = probes[0].len();
    let mut out = Vec::with_capacity(n_mc);
    for rep in 0..n_mc {
        let rep_seed = seed ^ H0_STREAM_SALT.wrapping_add(rep as u64);
        let mut rng = StdRng::seed_from_u64(rep_seed);
        // Random rational radar: Dirichlet(1) Cobb-Douglas weights.
        let mut w: Vec<f64> = (0..m)
            .map(|_| -rng.random::<f64>().max(f64::MIN_POSITIVE).ln())
            .collect();
        let total: f64 = w.iter().sum();
        for v in &mut w {
            *v /= total;
        }
        let radar = SyntheticRadar::new(UtilityKind::CobbDouglas(w), true)?;
        let clean = generate_radar_responses(&radar, probes, rep_seed)?;
        let noisy = add_noise(&clean, noise_sigma, &mut rng)?;
        let (r_star, _) = minimum_perturbation(&noisy, GARP_TOL);
        out.push(r_star);
    }
    Ok(out)
}

fn add_noise(
    data: &ProbeResponseDataset,
    noise_sigma: f64,
    rng: &mut StdRng,
) -> Result<ProbeResponseDataset> {
    let responses = data
        .responses
        .iter()
        .map(|b| {
            b.map(|v| {
                let noise: f64 = StandardNormal.sample(rng);
                (v + noise_sigma * noise).max(0.0)
            })
        })
        .collect();
    ProbeResponseDataset::new(data.probes.clone(), responses)
}

/// Full detector: statistic, Monte-Carlo threshold, decision, p-value.
pub fn detect_noisy(
    data_obs: &ProbeResponseDataset,
    noise_sigma: f64,
    gamma: f64,
    n_mc: usize,
    seed: u64,
) -> Result<DetectionResult> {
    if !(noise_sigma > 0.0) {
        return Err(Error::Config("noise_sigma must be > 0".into()));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Config("gamma must be in (0, 1)".into()));
    }
    if n_mc < 10 {
        return Err(Error::Config("need at least 10 calibration draws".into()));
    }
    let (statistic, overflow) = minimum_perturbation(data_obs, GARP_TOL);
    let h0 = h0_statistics(&data_obs.probes, noise_sigma, n_mc, seed)?;
    let mut sorted = h0.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let rank = ((1.0 - gamma) * n_mc as f64).ceil() as usize;
    let threshold = sorted[rank.clamp(1, n_mc) - 1];
    let exceed = h0.iter().filter(|&&v| v >= statistic).count();
    Ok(DetectionResult {
        statistic,
        threshold,
        decision: if statistic > threshold { Decision::RejectH0 } else { Decision::AcceptH0 },
        p_value_estimate: (1 + exceed) as f64 / (n_mc + 1) as f64,
        overflow,
    })
}

/// Detector with a precomputed threshold (lets calibration be shared
/// across many trials at the same probes and noise level).
pub fn detect_with_threshold(data_obs: &ProbeResponseDataset, threshold: f64) -> DetectionResult {
    let (statistic, overflow) = minimum_perturbation(data_obs, GARP_TOL);
    DetectionResult {
        statistic,
        threshold,
        decision: if statistic > threshold { Decision::RejectH0 } else { Decision::AcceptH0 },
        p_value_estimate: f64::NAN,
        overflow,
    }
}

/// Probe-optimization output.
#[derive(Debug, Clone)]
pub struct ProbeOptResult {
    pub probes: Vec<DVector<f64>>,
    /// Per-iteration Type-II error estimates.
    pub type2_trace: Vec<f64>,
    pub flat_objective: bool,
}

/// Minimize the estimated Type-II error over the probe sequence with
/// SPSA. The objective at a probe matrix is the Monte-Carlo probability
/// that the detector accepts H0 on data from the (non-rational) radar;
/// common random numbers keep it a deterministic function of the probes.
#[allow(clippy::too_many_arguments)]
pub fn optimize_probes_spsa(
    initial_probes: &[DVector<f64>],
    radar: &SyntheticRadar,
    noise_sigma: f64,
    gamma: f64,
    n_iter: usize,
    gains: SpsaGains,
    seed: u64,
    n_mc_objective: usize,
) -> Result<ProbeOptResult> {
    if initial_probes.is_empty() {
        return Err(Error::Config("need at least one probe".into()));
    }
    let m = initial_probes[0].len();
    if initial_probes
        .iter()
        .any(|a| a.len() != m || a.iter().any(|&v| !(v > 0.0)))
    {
        return Err(Error::Config("initial probes must be strictly positive".into()));
    }
    let n_probes = initial_probes.len();
    const PROBE_FLOOR: f64 = 1e-3;

    let flat0: Vec<f64> = initial_probes.iter().flat_map(|a| a.iter().copied()).collect();
    let obj_seed = seed ^ OBJECTIVE_STREAM_SALT;
    let objective = |x: &[f64]| -> Result<f64> {
        let probes: Vec<DVector<f64>> = (0..n_probes)
            .map(|i| DVector::from_row_slice(&x[i * m..(i + 1) * m]))
            .collect();
        estimate_type2(&probes, radar, noise_sigma, gamma, n_mc_objective, obj_seed)
    };

    let result = spsa_minimize(objective, &flat0, PROBE_FLOOR, gains, n_iter, seed)?;
    let probes = (0..n_probes)
        .map(|i| DVector::from_row_slice(&result.x[i * m..(i + 1) * m]))
        .collect();
    Ok(ProbeOptResult {
        probes,
        type2_trace: result.trace,
        flat_objective: result.flat_objective,
    })
}

/// Monte-Carlo Type-II error of the detector at the given probes: the
/// fraction of non-rational datasets the test accepts.
pub fn estimate_type2(
    probes: &[DVector<f64>],
    radar: &SyntheticRadar,
    noise_sigma: f64,
    gamma: f64,
    n_mc: usize,
    seed: u64,
) -> Result<f64> {
    let threshold = calibrate_threshold(probes, noise_sigma, gamma, n_mc, seed)?;
    let control = SyntheticRadar::new(radar.utility_kind.clone(), false)?;
    let mut accepts = 0usize;
    for rep in 0..n_mc {
        let rep_seed = seed.wrapping_add(0x5851_f42d_4c95_7f2d).wrapping_add(rep as u64);
        let clean = generate_radar_responses(&control, probes, rep_seed)?;
        let mut rng = StdRng::seed_from_u64(rep_seed ^ 0xffff);
        let noisy = add_noise(&clean, noise_sigma, &mut rng)?;
        if detect_with_threshold(&noisy, threshold).decision == Decision::AcceptH0 {
            accepts += 1;
        }
    }
    Ok(accepts as f64 / n_mc as f64)
}
