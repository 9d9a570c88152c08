//! Reference methods: zero/mean imputation followed by ridge or logistic
//! regression, and the two extremes of the SPSM family (independent
//! per-pattern submodels and a fully shared model).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureSchema, PatternMask};
use crate::error::{Result, SpsmError};
use crate::linalg::psd_solve;
use crate::patterns::FallbackPolicy;
use crate::spsm::{
    fit, registry_for, sigmoid, Hyperparameters, MainNorm, SpsmModel, SpsmParams, Task,
    EFFECTIVELY_INFINITE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Imputer {
    Zero,
    Mean,
}

impl std::str::FromStr for Imputer {
    type Err = SpsmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Imputer::Zero),
            "mean" => Ok(Imputer::Mean),
            _ => Err(SpsmError::Config(format!("unknown imputer {s:?}, expected zero or mean"))),
        }
    }
}

/// Per-column fill values learned from training data.
pub fn imputation_values(imputer: Imputer, ds: &Dataset) -> Vec<f64> {
    match imputer {
        Imputer::Zero => vec![0.0; ds.n_encoded()],
        Imputer::Mean => (0..ds.n_encoded())
            .map(|j| {
                let (sum, count) = ds
                    .rows()
                    .iter()
                    .filter_map(|r| r[j])
                    .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
                if count == 0 {
                    log::warn!(
                        "column {} has no observed values; imputing 0",
                        ds.schema().encoded[j].name
                    );
                    0.0
                } else {
                    sum / count as f64
                }
            })
            .collect(),
    }
}

/// Fill missing cells with `values`. The result is fully observed, so its
/// masks are all-observed; the source dataset keeps the original masks.
pub fn impute(ds: &Dataset, values: &[f64]) -> Result<Dataset> {
    if values.len() != ds.n_encoded() {
        return Err(SpsmError::Validation(format!(
            "{} imputation values for {} columns",
            values.len(),
            ds.n_encoded()
        )));
    }
    let rows = ds
        .rows()
        .iter()
        .map(|r| r.iter().zip(values).map(|(c, v)| Some(c.unwrap_or(*v))).collect())
        .collect();
    let masks = vec![PatternMask::complete(ds.schema().n_original()); ds.n_rows()];
    Dataset::new(ds.schema().clone(), rows, ds.targets().to_vec(), masks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputedModel {
    pub imputer: Imputer,
    pub values: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub ridge_weight: f64,
    pub task: Task,
    pub schema: FeatureSchema,
}

impl ImputedModel {
    pub fn score(&self, x: &[Option<f64>]) -> Result<f64> {
        if x.len() != self.coefficients.len() {
            return Err(SpsmError::Validation(format!(
                "row has {} encoded cells, model expects {}",
                x.len(),
                self.coefficients.len()
            )));
        }
        Ok(x.iter()
            .zip(&self.values)
            .zip(&self.coefficients)
            .map(|((c, v), w)| c.unwrap_or(*v) * w)
            .sum::<f64>()
            + self.intercept)
    }

    /// Regression value or class-1 probability.
    pub fn predict(&self, x: &[Option<f64>]) -> Result<f64> {
        let s = self.score(x)?;
        Ok(match self.task {
            Task::Regression => s,
            Task::Classification => sigmoid(s),
        })
    }

    pub fn nonzero_count(&self) -> usize {
        self.coefficients
            .iter()
            .filter(|w| w.abs() >= crate::spsm::ZERO_THRESHOLD)
            .count()
    }
}

fn require_complete(ds: &Dataset) -> Result<()> {
    if let Some(i) = ds.rows().iter().position(|r| r.iter().any(Option::is_none)) {
        return Err(SpsmError::Validation(format!(
            "row {} has missing cells; impute first",
            i + 1
        )));
    }
    if ds.is_empty() {
        return Err(SpsmError::Validation("cannot fit an empty dataset".into()));
    }
    Ok(())
}

fn check_weight(w: f64) -> Result<()> {
    if w.is_finite() && w >= 0.0 {
        Ok(())
    } else {
        Err(SpsmError::Config(format!("ridge weight must be >= 0, got {w}")))
    }
}

/// Minimizes `(1/n)‖Xw + b − y‖² + ρ‖w‖²` through centered normal equations.
pub fn fit_ridge(ds: &Dataset, ridge_weight: f64) -> Result<ImputedModel> {
    require_complete(ds)?;
    check_weight(ridge_weight)?;
    let (n, p) = (ds.n_rows(), ds.n_encoded());
    let x = DMatrix::from_fn(n, p, |i, j| ds.rows()[i][j].unwrap_or(0.0));
    let y = DVector::from_column_slice(ds.targets());
    let x_mean = x.row_mean();
    let y_mean = y.mean();
    let mut xc = x.clone();
    for mut row in xc.row_iter_mut() {
        row -= &x_mean;
    }
    let yc = y.add_scalar(-y_mean);
    let nf = n as f64;
    let mut gram = xc.transpose() * &xc / nf;
    for j in 0..p {
        gram[(j, j)] += ridge_weight;
    }
    let rhs = xc.transpose() * yc / nf;
    let w = psd_solve(&gram, &rhs);
    let intercept = y_mean - (x_mean * &w)[(0, 0)];
    Ok(ImputedModel {
        imputer: Imputer::Zero,
        values: vec![0.0; p],
        coefficients: w.iter().copied().collect(),
        intercept,
        ridge_weight,
        task: Task::Regression,
        schema: ds.schema().clone(),
    })
}

/// ℓ2-penalized logistic regression, `(1/n)Σ logloss + ρ‖w‖²`, solved by the
/// SPSM machinery restricted to one unspecialized pattern.
pub fn fit_logistic(ds: &Dataset, ridge_weight: f64) -> Result<ImputedModel> {
    fit_logistic_with(ds, ridge_weight, &Hyperparameters::default())
}

fn fit_logistic_with(ds: &Dataset, ridge_weight: f64, solver: &Hyperparameters) -> Result<ImputedModel> {
    require_complete(ds)?;
    check_weight(ridge_weight)?;
    let registry = registry_for(ds, usize::MAX, FallbackPolicy::MainModelZeroImpute)?;
    let hp = Hyperparameters {
        gamma: ds.n_rows() as f64 * ridge_weight,
        lambda: 0.0,
        main_norm: MainNorm::L2Squared,
        task: Task::Classification,
        pattern_intercepts: false,
        tol: solver.tol,
        max_iter: solver.max_iter,
        ..Default::default()
    };
    let fitted = fit(ds, &registry, &hp)?;
    Ok(ImputedModel {
        imputer: Imputer::Zero,
        values: vec![0.0; ds.n_encoded()],
        coefficients: fitted.theta,
        intercept: fitted.intercept,
        ridge_weight,
        task: Task::Classification,
        schema: ds.schema().clone(),
    })
}

/// Impute with training statistics, then fit ridge or logistic regression.
pub fn fit_imputed(
    ds: &Dataset,
    imputer: Imputer,
    ridge_weight: f64,
    task: Task,
    solver: &Hyperparameters,
) -> Result<ImputedModel> {
    let values = imputation_values(imputer, ds);
    let complete = impute(ds, &values)?;
    let mut model = match task {
        Task::Regression => fit_ridge(&complete, ridge_weight)?,
        Task::Classification => fit_logistic_with(&complete, ridge_weight, solver)?,
    };
    model.imputer = imputer;
    model.values = values;
    Ok(model)
}

/// Minimum pattern size for PSM when none is given: twice the number of
/// encoded features.
pub fn default_cc_threshold(ds: &Dataset) -> usize {
    2 * ds.n_encoded()
}

/// Pattern submodels without sharing: one ridge (or logistic) model per
/// pattern with at least `cc_threshold` rows, fitted as SPSM with γ → ∞,
/// λ = 0 and ridge weight ρ on each Δ.
///
/// The result is re-expressed so the shared part holds only what the
/// submodels cannot supply: θ is zero when every pattern is specialized,
/// otherwise it is a zero-imputation fit over all rows that serves the
/// below-threshold patterns. Submodels are unchanged by this.
pub fn fit_psm(
    ds: &Dataset,
    ridge_weight: f64,
    cc_threshold: Option<usize>,
    solver: &Hyperparameters,
) -> Result<SpsmModel> {
    check_weight(ridge_weight)?;
    let cc = cc_threshold.unwrap_or_else(|| default_cc_threshold(ds));
    let registry = registry_for(ds, cc, FallbackPolicy::MainModelZeroImpute)?;
    let hp = Hyperparameters {
        gamma: EFFECTIVELY_INFINITE,
        lambda: 0.0,
        lambda_per_pattern: Default::default(),
        main_norm: MainNorm::L2Squared,
        delta_ridge: ridge_weight,
        pattern_intercepts: true,
        ..solver.clone()
    };
    let raw = fit(ds, &registry, &hp)?;

    let all_specialized = registry.entries().iter().all(|e| e.specialized);
    let (theta, intercept) = if all_specialized {
        let mean = ds.targets().iter().sum::<f64>() / ds.n_rows() as f64;
        let b = match hp.task {
            Task::Regression => mean,
            Task::Classification => (mean / (1.0 - mean)).ln().clamp(-30.0, 30.0),
        };
        (vec![0.0; ds.n_encoded()], b)
    } else {
        let shared = fit_imputed(ds, Imputer::Zero, ridge_weight, hp.task, solver)?;
        (shared.coefficients, shared.intercept)
    };

    let mut deltas = Vec::with_capacity(registry.len());
    let mut alphas = Vec::with_capacity(registry.len());
    for e in registry.entries() {
        let observed = ds.schema().observed_encoded(&e.mask);
        if e.specialized {
            deltas.push(
                raw.submodel(e.id)
                    .iter()
                    .zip(&observed)
                    .map(|(w, &j)| w - theta[j])
                    .collect(),
            );
            alphas.push(raw.submodel_intercept(e.id) - intercept);
        } else {
            deltas.push(vec![0.0; observed.len()]);
            alphas.push(0.0);
        }
    }
    let params = SpsmParams {
        theta,
        intercept,
        deltas,
        alphas,
    };
    Ok(SpsmModel::from_params(
        ds.schema().clone(),
        registry,
        hp,
        params,
        raw.diagnostics,
    ))
}

/// A single shared model: λ → ∞ forces every Δ to zero. With pattern
/// intercepts enabled each pattern keeps a free offset; without them this
/// is zero-imputation ridge with weight `gamma / n`.
pub fn fit_full_sharing(
    ds: &Dataset,
    gamma: f64,
    pattern_intercepts: bool,
    solver: &Hyperparameters,
) -> Result<SpsmModel> {
    let registry = registry_for(ds, 0, FallbackPolicy::MainModelZeroImpute)?;
    let hp = Hyperparameters {
        gamma,
        lambda: EFFECTIVELY_INFINITE,
        lambda_per_pattern: Default::default(),
        main_norm: MainNorm::L2Squared,
        delta_ridge: 0.0,
        pattern_intercepts,
        ..solver.clone()
    };
    fit(ds, &registry, &hp)
}
