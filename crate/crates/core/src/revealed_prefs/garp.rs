//! Generalized Axiom of Revealed Preference via transitive closure.
//!
//! Bundle t is directly revealed preferred to s when beta_s was affordable
//! at probe t: alpha_t' beta_t >= alpha_t' beta_s - tol. GARP holds when no
//! s in the transitive closure of t strictly reveals the reverse,
//! alpha_s' beta_s > alpha_s' beta_t + tol. Closure by Warshall's
//! algorithm, O(N^3).

use super::ProbeResponseDataset;

#[derive(Debug, Clone)]
pub struct GarpResult {
    pub passes: bool,
    /// A witnessing preference chain t -> ... -> s whose endpoint strictly
    /// prefers its own bundle to beta_t, present iff `passes` is false.
    pub violating_cycle: Option<Vec<usize>>,
}

pub fn check_garp(data: &ProbeResponseDataset, tol: f64) -> GarpResult {
    let n = data.len();
    let mut exp = vec![vec![0.0f64; n]; n];
    for t in 0..n {
        for s in 0..n {
            exp[t][s] = data.expenditure(t, s);
        }
    }

    // reach[t][s]: t revealed preferred to s (directly or transitively).
    let mut reach = vec![vec![false; n]; n];
    let mut next = vec![vec![usize::MAX; n]; n];
    for t in 0..n {
        for s in 0..n {
            if t != s && exp[t][t] >= exp[t][s] - tol {
                reach[t][s] = true;
                next[t][s] = s;
            }
        }
    }
    for k in 0..n {
        for t in 0..n {
            if !reach[t][k] {
                continue;
            }
            for s in 0..n {
                if reach[k][s] && !reach[t][s] {
                    reach[t][s] = true;
                    next[t][s] = next[t][k];
                }
            }
        }
    }

    for t in 0..n {
        for s in 0..n {
            if t != s && reach[t][s] && exp[s][s] > exp[s][t] + tol {
                // Reconstruct the chain t -> ... -> s.
                let mut cycle = vec![t];
                let mut cur = t;
                while cur != s {
                    cur = next[cur][s];
                    cycle.push(cur);
                }
                return GarpResult { passes: false, violating_cycle: Some(cycle) };
            }
        }
    }
    GarpResult { passes: true, violating_cycle: None }
}
