//! Revealed-preference analysis of a cognitive sensor.
//!
//! Given probe/response pairs (alpha_n, beta_n) with the budget
//! alpha_n' beta <= 1, decide whether the responses could have come from a
//! monotone-utility maximizer, reconstruct a rationalizing utility when
//! they could, detect rationality from noisy responses, and optimize the
//! probes to sharpen that detector.

pub mod afriat;
pub mod detect;
pub mod garp;
pub mod irl;
pub mod radar;
pub mod simplex;
pub mod spectral;
pub mod spsa;

pub use afriat::{afriat_feasibility, reconstruct_utility, AfriatCertificate, ReconstructedUtility};
pub use detect::{
    calibrate_threshold, detect_noisy, detect_with_threshold, minimum_perturbation,
    optimize_probes_spsa, Decision, DetectionResult, ProbeOptResult,
};
pub use garp::{check_garp, GarpResult};
pub use irl::check_irl_inequalities;
pub use radar::{generate_radar_responses, SyntheticRadar, UtilityKind};
pub use spectral::{spectral_extract, verify_budget_link};
pub use spsa::{spsa_minimize, SpsaGains, SpsaResult};

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Default absolute tolerance on budget comparisons.
pub const GARP_TOL: f64 = 1e-9;

/// Probe/response dataset: N probes alpha_n (strictly positive) and N
/// responses beta_n (nonnegative), all of dimension m.
#[derive(Debug, Clone)]
pub struct ProbeResponseDataset {
    pub probes: Vec<DVector<f64>>,
    pub responses: Vec<DVector<f64>>,
}

impl ProbeResponseDataset {
    pub fn new(probes: Vec<DVector<f64>>, responses: Vec<DVector<f64>>) -> Result<Self> {
        if probes.is_empty() || probes.len() != responses.len() {
            return Err(Error::Config("need equally many probes and responses".into()));
        }
        let m = probes[0].len();
        if m == 0 {
            return Err(Error::Config("probe dimension must be >= 1".into()));
        }
        for (n, (a, b)) in probes.iter().zip(&responses).enumerate() {
            if a.len() != m || b.len() != m {
                return Err(Error::Config(format!("entry {n} has inconsistent dimension")));
            }
            if a.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::Config(format!("probe {n} must be strictly positive")));
            }
            if b.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(Error::Config(format!("response {n} must be nonnegative")));
            }
        }
        Ok(Self { probes, responses })
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.probes[0].len()
    }

    /// Expenditure of bundle s at probe t: alpha_t' beta_s.
    pub fn expenditure(&self, t: usize, s: usize) -> f64 {
        self.probes[t].dot(&self.responses[s])
    }

    /// Same dataset with every probe scaled by 1/c (budget bound 1 -> c).
    pub fn scaled_budget(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::Config("budget scale must be positive".into()));
        }
        Self::new(
            self.probes.iter().map(|a| a / c).collect(),
            self.responses.clone(),
        )
    }

    /// Serialize as CSV with header `n,alpha_1..alpha_m,beta_1..beta_m`.
    pub fn to_csv(&self) -> String {
        let m = self.dim();
        let mut out = String::from("n");
        for i in 1..=m {
            out.push_str(&format!(",alpha_{i}"));
        }
        for i in 1..=m {
            out.push_str(&format!(",beta_{i}"));
        }
        out.push('\n');
        for n in 0..self.len() {
            out.push_str(&format!("{}", n + 1));
            for v in self.probes[n].iter() {
                out.push_str(&format!(",{v:.16e}"));
            }
            for v in self.responses[n].iter() {
                out.push_str(&format!(",{v:.16e}"));
            }
            out.push('\n');
        }
        out
    }

    /// Parse the CSV format written by [`Self::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Config("empty dataset file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 3 || cols[0] != "n" || (cols.len() - 1) % 2 != 0 {
            return Err(Error::Config("dataset header must be n,alpha_1..,beta_1..".into()));
        }
        let m = (cols.len() - 1) / 2;
        let mut probes = Vec::new();
        let mut responses = Vec::new();
        for (i, line) in lines.enumerate() {
            let vals: Vec<&str> = line.split(',').map(str::trim).collect();
            if vals.len() != cols.len() {
                return Err(Error::Config(format!("row {} has {} fields, expected {}", i + 1, vals.len(), cols.len())));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| Error::Config(format!("bad number '{s}' in row {}", i + 1)))
            };
            let mut a = DVector::<f64>::zeros(m);
            let mut b = DVector::<f64>::zeros(m);
            for j in 0..m {
                a[j] = parse(vals[1 + j])?;
                b[j] = parse(vals[1 + m + j])?;
            }
            probes.push(a);
            responses.push(b);
        }
        Self::new(probes, responses)
    }
}
