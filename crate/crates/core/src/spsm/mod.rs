//! Sharing pattern submodels.
//!
//! For a row with pattern `m` the score is
//! `(θ_¬m + Δ_¬m)ᵀ x_¬m + b + α_m`, and parameters minimize
//!
//! ```text
//! (1/n) Σ loss(score_i, y_i) + (γ/n) ‖θ‖ + Σ_m (λ_m/n_m) ‖Δ_¬m‖₁
//! ```
//!
//! with squared error for regression and logistic loss for classification.
//! Intercepts are never penalized. `‖θ‖` is either ℓ1 or squared ℓ2.

mod problem;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use problem::SpsmProblem;

use crate::data::{extract_patterns, Dataset, FeatureSchema, PatternMask};
use crate::error::{Result, SpsmError};
use crate::patterns::{FallbackPolicy, PatternRegistry, Resolution};
use crate::prox::{minimize, ProxOptions};

/// Coefficients with magnitude below this count as zero in sparsity reports.
pub const ZERO_THRESHOLD: f64 = 1e-8;

/// Finite stand-in for an infinite regularization weight.
pub const EFFECTIVELY_INFINITE: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    #[default]
    Regression,
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MainNorm {
    L1,
    /// Ridge-style `‖θ‖₂²`.
    #[default]
    L2Squared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub gamma: f64,
    /// Default λ for every pattern.
    pub lambda: f64,
    /// Per-pattern overrides keyed by pattern id.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub lambda_per_pattern: BTreeMap<usize, f64>,
    pub main_norm: MainNorm,
    pub task: Task,
    /// Weight ρ of an optional `Σ (n_m/n) ρ ‖Δ_¬m‖²` term. With γ → ∞ this
    /// turns each submodel into an independent ridge fit with weight ρ.
    #[serde(default)]
    pub delta_ridge: f64,
    #[serde(default = "default_true")]
    pub pattern_intercepts: bool,
    pub tol: f64,
    pub max_iter: usize,
}

fn default_true() -> bool {
    true
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            gamma: 0.0,
            lambda: 1.0,
            lambda_per_pattern: BTreeMap::new(),
            main_norm: MainNorm::default(),
            task: Task::default(),
            delta_ridge: 0.0,
            pattern_intercepts: true,
            tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

impl Hyperparameters {
    pub fn new(gamma: f64, lambda: f64) -> Self {
        Hyperparameters {
            gamma,
            lambda,
            ..Default::default()
        }
    }

    pub fn with_task(mut self, task: Task) -> Self {
        self.task = task;
        self
    }

    pub fn lambda_for(&self, pattern: usize) -> f64 {
        self.lambda_per_pattern
            .get(&pattern)
            .copied()
            .unwrap_or(self.lambda)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.gamma) {
            return Err(SpsmError::Config(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !ok(self.lambda) || !self.lambda_per_pattern.values().all(|&l| ok(l)) {
            return Err(SpsmError::Config("lambda values must be >= 0".into()));
        }
        if !ok(self.delta_ridge) {
            return Err(SpsmError::Config("delta_ridge must be >= 0".into()));
        }
        if !(self.tol > 0.0) {
            return Err(SpsmError::Config(format!("tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Parameters in structured form. `deltas[k]` is dense over the encoded
/// columns observed under pattern `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpsmParams {
    pub theta: Vec<f64>,
    pub intercept: f64,
    pub deltas: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternParams {
    pub mask: PatternMask,
    pub delta: Vec<f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub initial_objective: f64,
    pub final_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpsmModel {
    pub task: Task,
    pub schema: FeatureSchema,
    pub registry: PatternRegistry,
    pub theta: Vec<f64>,
    pub intercept: f64,
    /// Indexed by pattern id.
    pub patterns: Vec<PatternParams>,
    pub hyperparameters: Hyperparameters,
    pub diagnostics: SolverDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// Regression value or class-1 probability.
    pub value: f64,
    pub resolution: Resolution,
}

pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Registry over the patterns present in `ds`.
pub fn registry_for(
    ds: &Dataset,
    min_pattern_n: usize,
    fallback: FallbackPolicy,
) -> Result<PatternRegistry> {
    PatternRegistry::build(&extract_patterns(ds), min_pattern_n, fallback)
}

/// Fit by accelerated proximal gradient from all-zero parameters.
pub fn fit(ds: &Dataset, registry: &PatternRegistry, hp: &Hyperparameters) -> Result<SpsmModel> {
    let problem = SpsmProblem::new(ds, registry, hp)?;
    let opts = ProxOptions {
        tol: hp.tol,
        max_iter: hp.max_iter,
        ..Default::default()
    };
    let report = minimize(&problem, problem.zeros(), &opts)?;
    if !report.converged {
        log::warn!(
            "solver stopped at max_iter = {} before reaching tol = {}",
            hp.max_iter,
            hp.tol
        );
    }
    let params = problem.unpack(&report.x);
    let diagnostics = SolverDiagnostics {
        iterations: report.iterations,
        converged: report.converged,
        initial_objective: report.trace[0],
        final_objective: report.objective,
    };
    Ok(SpsmModel::from_params(
        ds.schema().clone(),
        registry.clone(),
        hp.clone(),
        params,
        diagnostics,
    ))
}

impl SpsmModel {
    pub fn from_params(
        schema: FeatureSchema,
        registry: PatternRegistry,
        hyperparameters: Hyperparameters,
        params: SpsmParams,
        diagnostics: SolverDiagnostics,
    ) -> Self {
        let patterns = registry
            .entries()
            .iter()
            .zip(params.deltas.into_iter().zip(params.alphas))
            .map(|(e, (delta, alpha))| PatternParams {
                mask: e.mask.clone(),
                delta,
                alpha,
            })
            .collect();
        SpsmModel {
            task: hyperparameters.task,
            schema,
            registry,
            theta: params.theta,
            intercept: params.intercept,
            patterns,
            hyperparameters,
            diagnostics,
        }
    }

    pub fn params(&self) -> SpsmParams {
        SpsmParams {
            theta: self.theta.clone(),
            intercept: self.intercept,
            deltas: self.patterns.iter().map(|p| p.delta.clone()).collect(),
            alphas: self.patterns.iter().map(|p| p.alpha).collect(),
        }
    }

    /// Encoded columns observed under pattern `id`, aligned with its Δ.
    pub fn observed(&self, id: usize) -> Vec<usize> {
        self.schema.observed_encoded(&self.patterns[id].mask)
    }

    /// `θ_¬m + Δ_¬m` for pattern `id`.
    pub fn submodel(&self, id: usize) -> Vec<f64> {
        self.observed(id)
            .iter()
            .zip(&self.patterns[id].delta)
            .map(|(&j, d)| self.theta[j] + d)
            .collect()
    }

    /// Total intercept `b + α_m` of pattern `id`.
    pub fn submodel_intercept(&self, id: usize) -> f64 {
        self.intercept + self.patterns[id].alpha
    }

    /// Linear score before any link function.
    pub fn score(&self, x: &[Option<f64>], mask: &PatternMask) -> Result<(f64, Resolution)> {
        if x.len() != self.theta.len() {
            return Err(SpsmError::Validation(format!(
                "row has {} encoded cells, model expects {}",
                x.len(),
                self.theta.len()
            )));
        }
        let resolution = self.registry.resolve(mask)?;
        let s = match resolution {
            Resolution::Pattern { id, .. } => {
                let p = &self.patterns[id];
                self.observed(id)
                    .iter()
                    .zip(&p.delta)
                    .map(|(&j, d)| (self.theta[j] + d) * x[j].unwrap_or(0.0))
                    .sum::<f64>()
                    + self.intercept
                    + p.alpha
            }
            Resolution::MainModel => {
                self.theta
                    .iter()
                    .zip(x)
                    .map(|(t, v)| t * v.unwrap_or(0.0))
                    .sum::<f64>()
                    + self.intercept
            }
        };
        Ok((s, resolution))
    }

    pub fn predict(&self, x: &[Option<f64>], mask: &PatternMask) -> Result<Prediction> {
        let (s, resolution) = self.score(x, mask)?;
        let value = match self.task {
            Task::Regression => s,
            Task::Classification => sigmoid(s),
        };
        Ok(Prediction { value, resolution })
    }

    /// Nonzero counts `(k, l)`: shared coefficients in θ and pattern-specific
    /// coefficients across all Δ.
    pub fn nonzero_counts(&self) -> (usize, usize) {
        let nz = |v: &f64| v.abs() >= ZERO_THRESHOLD;
        let shared = self.theta.iter().filter(|v| nz(v)).count();
        let specific = self
            .patterns
            .iter()
            .map(|p| p.delta.iter().filter(|v| nz(v)).count())
            .sum();
        (shared, specific)
    }

    /// Objective of this model's parameters on `ds`.
    pub fn objective_on(&self, ds: &Dataset) -> Result<f64> {
        objective(&self.params(), ds, &self.registry, &self.hyperparameters)
    }
}

/// Objective value of `params` on `ds`.
pub fn objective(
    params: &SpsmParams,
    ds: &Dataset,
    registry: &PatternRegistry,
    hp: &Hyperparameters,
) -> Result<f64> {
    let problem = SpsmProblem::new(ds, registry, hp)?;
    check_shape(params, registry, ds)?;
    Ok(problem.objective(params))
}

/// Gradient of the smooth part of the objective, in structured form.
pub fn smooth_gradient(
    params: &SpsmParams,
    ds: &Dataset,
    registry: &PatternRegistry,
    hp: &Hyperparameters,
) -> Result<SpsmParams> {
    let problem = SpsmProblem::new(ds, registry, hp)?;
    check_shape(params, registry, ds)?;
    Ok(problem.smooth_gradient(params))
}

fn check_shape(
    params: &SpsmParams,
    registry: &PatternRegistry,
    ds: &Dataset,
) -> Result<()> {
    let schema = ds.schema();
    let ok = params.theta.len() == schema.n_encoded()
        && params.deltas.len() == registry.len()
        && params.alphas.len() == registry.len()
        && registry
            .entries()
            .iter()
            .zip(&params.deltas)
            .all(|(e, d)| d.len() == schema.observed_encoded(&e.mask).len());
    if ok {
        Ok(())
    } else {
        Err(SpsmError::Validation(
            "parameters are not dimensioned to the schema and registry".into(),
        ))
    }
}

#[cfg(test)]
mod tests;
