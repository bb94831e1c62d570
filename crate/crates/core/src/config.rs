//! Structured-file loading of model parameters.
//!
//! Flat key -> scalar / matrix layout; matrices are row-major nested
//! arrays, vectors are flat arrays:
//!
//! ```json
//! {
//!   "a": [[0.9]], "c": [[1.0]], "q": [[1.0]], "r": [[1.0]],
//!   "prior_mean": [0.0], "prior_cov": [[1.0]]
//! }
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inverse_filter::{ActionModel, PhiKind};
use crate::state_space::LinearGaussianModel;

/// On-disk form of [`LinearGaussianModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub a: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub prior_mean: Vec<f64>,
    pub prior_cov: Vec<Vec<f64>>,
}

/// On-disk form of [`ActionModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionSpec {
    /// One of "identity", "covariance", "inverse_covariance".
    pub phi: String,
    pub action_noise_var: f64,
}

pub fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(Error::Config(format!("{what}: matrix must be nonempty")));
    }
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!("{what}: ragged or empty matrix rows")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl ModelSpec {
    pub fn to_model(&self) -> Result<LinearGaussianModel> {
        LinearGaussianModel::new(
            matrix_from_rows(&self.a, "a")?,
            matrix_from_rows(&self.c, "c")?,
            matrix_from_rows(&self.q, "q")?,
            matrix_from_rows(&self.r, "r")?,
            DVector::from_vec(self.prior_mean.clone()),
            matrix_from_rows(&self.prior_cov, "prior_cov")?,
        )
    }

    pub fn from_model(model: &LinearGaussianModel) -> Self {
        Self {
            a: matrix_to_rows(&model.a),
            c: matrix_to_rows(&model.c),
            q: matrix_to_rows(&model.q),
            r: matrix_to_rows(&model.r),
            prior_mean: model.prior_mean.iter().copied().collect(),
            prior_cov: matrix_to_rows(&model.prior_cov),
        }
    }

    pub fn from_json(text: &str) -> Result<LinearGaussianModel> {
        let spec: ModelSpec = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("model config: {e}")))?;
        spec.to_model()
    }
}

impl ActionSpec {
    pub fn to_action(&self) -> Result<ActionModel> {
        let phi = match self.phi.as_str() {
            "identity" => PhiKind::Identity,
            "covariance" => PhiKind::Covariance,
            "inverse_covariance" => PhiKind::InverseCovariance,
            other => {
                return Err(Error::Config(format!(
                    "unknown phi '{other}' (expected identity | covariance | inverse_covariance)"
                )))
            }
        };
        ActionModel::new(phi, self.action_noise_var)
    }
}
