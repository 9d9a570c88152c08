//! Closed-form ground truth for linear-Gaussian data.
//!
//! With `X ~ N(μ, Σ)` and `Y = θᵀX + α_M + ε`, the Bayes-optimal predictor
//! under pattern `m` is `(θ_¬m + Δ_¬m)ᵀ x_¬m + C_m` where
//!
//! ```text
//! Δ_¬m = Σ_¬m,¬m⁻¹ Σ_¬m,m θ_m
//! C_m  = θ_mᵀ (μ_m − Σ_m,¬m Σ_¬m,¬m⁻¹ μ_¬m) + α_m
//! ```
//!
//! All solves go through a Cholesky factor of `Σ_¬m,¬m`.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::PatternMask;
use crate::error::{Result, SpsmError};
use crate::linalg::{spd_solve, submatrix, subvector};

/// Absolute tolerance for calling a precision-matrix entry zero.
pub const PRECISION_ZERO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianDgp {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub theta: DVector<f64>,
    pub alpha: BTreeMap<PatternMask, f64>,
    pub sigma_y: f64,
}

/// On-disk form: covariance stored row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct DgpFile {
    mu: Vec<f64>,
    sigma: Vec<f64>,
    theta: Vec<f64>,
    sigma_y: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    alpha: BTreeMap<PatternMask, f64>,
}

/// Split of feature indices into observed and missing under a mask.
struct Split {
    obs: Vec<usize>,
    mis: Vec<usize>,
}

impl LinearGaussianDgp {
    pub fn new(
        mu: Vec<f64>,
        sigma: DMatrix<f64>,
        theta: Vec<f64>,
        alpha: BTreeMap<PatternMask, f64>,
        sigma_y: f64,
    ) -> Result<Self> {
        let d = mu.len();
        if sigma.shape() != (d, d) || theta.len() != d {
            return Err(SpsmError::Oracle(format!(
                "dimension mismatch: mu {d}, sigma {:?}, theta {}",
                sigma.shape(),
                theta.len()
            )));
        }
        for i in 0..d {
            for j in 0..i {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 {
                    return Err(SpsmError::Oracle(format!(
                        "sigma not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let min_eig = sigma.clone().symmetric_eigenvalues().min();
        if !(min_eig > 0.0) {
            return Err(SpsmError::Oracle(format!(
                "sigma is not positive definite (smallest eigenvalue {min_eig})"
            )));
        }
        if alpha.keys().any(|m| m.len() != d) {
            return Err(SpsmError::Oracle("alpha mask length differs from d".into()));
        }
        if !(sigma_y >= 0.0) {
            return Err(SpsmError::Oracle(format!("sigma_y must be >= 0, got {sigma_y}")));
        }
        Ok(LinearGaussianDgp {
            mu: DVector::from_vec(mu),
            sigma,
            theta: DVector::from_vec(theta),
            alpha,
            sigma_y,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn alpha_for(&self, m: &PatternMask) -> f64 {
        self.alpha.get(m).copied().unwrap_or(0.0)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: DgpFile = serde_json::from_str(text)?;
        let d = f.mu.len();
        if f.sigma.len() != d * d {
            return Err(SpsmError::Oracle(format!(
                "sigma has {} entries, expected {}",
                f.sigma.len(),
                d * d
            )));
        }
        let sigma = DMatrix::from_row_slice(d, d, &f.sigma);
        Self::new(f.mu, sigma, f.theta, f.alpha, f.sigma_y)
    }

    pub fn to_json(&self) -> Result<String> {
        let d = self.dim();
        let f = DgpFile {
            mu: self.mu.iter().copied().collect(),
            sigma: (0..d)
                .flat_map(|i| (0..d).map(move |j| (i, j)))
                .map(|(i, j)| self.sigma[(i, j)])
                .collect(),
            theta: self.theta.iter().copied().collect(),
            sigma_y: self.sigma_y,
            alpha: self.alpha.clone(),
        };
        Ok(serde_json::to_string_pretty(&f)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SpsmError::io(path, e))?;
        Self::from_json(&text)
    }

    fn split(&self, m: &PatternMask) -> Result<Split> {
        if m.len() != self.dim() {
            return Err(SpsmError::Oracle(format!(
                "mask {m} has {} bits, dgp has {} features",
                m.len(),
                self.dim()
            )));
        }
        Ok(Split {
            obs: m.observed_indices(),
            mis: m.missing_indices(),
        })
    }

    /// `Σ_¬m,¬m⁻¹ Σ_¬m,m` (observed × missing).
    fn regression_matrix(&self, s: &Split) -> Result<DMatrix<f64>> {
        let s_oo = submatrix(&self.sigma, &s.obs, &s.obs);
        let s_om = submatrix(&self.sigma, &s.obs, &s.mis);
        spd_solve(&s_oo, &s_om)
            .ok_or_else(|| SpsmError::Oracle("observed covariance block is singular".into()))
    }

    /// Optimal specialization `Δ_¬m`, ordered like the observed features.
    pub fn optimal_delta(&self, m: &PatternMask) -> Result<DVector<f64>> {
        let s = self.split(m)?;
        if s.mis.is_empty() || s.obs.is_empty() {
            return Ok(DVector::zeros(s.obs.len()));
        }
        let theta_m = subvector(&self.theta, &s.mis);
        Ok(self.regression_matrix(&s)? * theta_m)
    }

    /// Constant term `C_m` of the Bayes-optimal predictor.
    pub fn optimal_intercept(&self, m: &PatternMask) -> Result<f64> {
        let s = self.split(m)?;
        let alpha = self.alpha_for(m);
        if s.mis.is_empty() {
            return Ok(alpha);
        }
        let theta_m = subvector(&self.theta, &s.mis);
        let mu_m = subvector(&self.mu, &s.mis);
        if s.obs.is_empty() {
            return Ok(theta_m.dot(&mu_m) + alpha);
        }
        let b = self.regression_matrix(&s)?;
        let mu_o = subvector(&self.mu, &s.obs);
        Ok(theta_m.dot(&(mu_m - b.transpose() * mu_o)) + alpha)
    }

    /// `E[X_m | X_¬m = x_obs]`; `x_obs` is ordered like the observed features.
    pub fn conditional_mean(&self, m: &PatternMask, x_obs: &[f64]) -> Result<DVector<f64>> {
        let s = self.split(m)?;
        self.check_obs(&s, x_obs)?;
        let mu_m = subvector(&self.mu, &s.mis);
        if s.mis.is_empty() || s.obs.is_empty() {
            return Ok(mu_m);
        }
        let b = self.regression_matrix(&s)?;
        let centered = DVector::from_column_slice(x_obs) - subvector(&self.mu, &s.obs);
        Ok(mu_m + b.transpose() * centered)
    }

    /// Bias `ξ_m(x) = θ_mᵀ E[X_m | x_¬m] + α_m` of predicting with `θ_¬m` alone.
    pub fn naive_bias(&self, m: &PatternMask, x_obs: &[f64]) -> Result<f64> {
        let s = self.split(m)?;
        let theta_m = subvector(&self.theta, &s.mis);
        Ok(theta_m.dot(&self.conditional_mean(m, x_obs)?) + self.alpha_for(m))
    }

    /// Whether feature `j` (observed under `m`) has zero precision with every
    /// feature missing under `m`, which forces its optimal Δ entry to zero.
    pub fn sparsity_predicate(&self, m: &PatternMask, j: usize) -> Result<bool> {
        let s = self.split(m)?;
        if m.is_missing(j) {
            return Err(SpsmError::Oracle(format!(
                "feature {j} is missing under {m}; predicate needs an observed feature"
            )));
        }
        let precision = self.precision()?;
        Ok(s
            .mis
            .iter()
            .all(|&k| precision[(j, k)].abs() < PRECISION_ZERO_TOL))
    }

    pub fn precision(&self) -> Result<DMatrix<f64>> {
        self.sigma
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| SpsmError::Oracle("sigma is singular".into()))
    }

    /// `E[Y | X_¬m = x_obs, M = m]`.
    pub fn bayes_predictor(&self, m: &PatternMask, x_obs: &[f64]) -> Result<f64> {
        let s = self.split(m)?;
        self.check_obs(&s, x_obs)?;
        let delta = self.optimal_delta(m)?;
        let linear: f64 = s
            .obs
            .iter()
            .zip(x_obs)
            .zip(delta.iter())
            .map(|((&j, x), d)| (self.theta[j] + d) * x)
            .sum();
        Ok(linear + self.optimal_intercept(m)?)
    }

    fn check_obs(&self, s: &Split, x_obs: &[f64]) -> Result<()> {
        if x_obs.len() != s.obs.len() {
            return Err(SpsmError::Oracle(format!(
                "expected {} observed values, got {}",
                s.obs.len(),
                x_obs.len()
            )));
        }
        Ok(())
    }
}
