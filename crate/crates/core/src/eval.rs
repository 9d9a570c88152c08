//! Metrics with confidence intervals, validation-set grid search and
//! learning curves.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::baselines::{fit_full_sharing, fit_imputed, fit_psm, Imputer};
use crate::data::{extract_patterns, Dataset};
use crate::error::{Result, SpsmError};
use crate::model::FittedModel;
use crate::patterns::FallbackPolicy;
use crate::spsm::{fit, registry_for, Hyperparameters, Task};

pub const BOOTSTRAP_RESAMPLES: usize = 2000;

pub const DEFAULT_GAMMAS: [f64; 6] = [0.0, 0.1, 1.0, 5.0, 10.0, 100.0];
pub const DEFAULT_LAMBDAS: [f64; 6] = [1.0, 5.0, 10.0, 100.0, 1000.0, 1e8];
pub const DEFAULT_RIDGE: [f64; 6] = [0.0, 1e-4, 1e-3, 1e-2, 0.1, 1.0];

fn check_lengths(pred: &[f64], y: &[f64]) -> Result<()> {
    if pred.is_empty() || pred.len() != y.len() {
        return Err(SpsmError::Metric(format!(
            "need equal nonempty inputs, got {} predictions and {} targets",
            pred.len(),
            y.len()
        )));
    }
    Ok(())
}

pub fn mse(pred: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(pred, y)?;
    Ok(pred.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / y.len() as f64)
}

/// Coefficient of determination; negative when worse than the mean.
pub fn r2(pred: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(pred, y)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(SpsmError::Metric("r2 is undefined for a constant target".into()));
    }
    let ss_res: f64 = pred.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn accuracy(labels: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(labels, y)?;
    Ok(labels.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64)
}

/// Area under the ROC curve from the rank-sum statistic; ties count 1/2.
pub fn auc(scores: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(scores, y)?;
    let n_pos = y.iter().filter(|&&t| t == 1.0).count();
    let n_neg = y.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(SpsmError::Metric("auc needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += order[i..=j].iter().filter(|&&k| y[k] == 1.0).count() as f64 * midrank;
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

fn z_value(alpha: f64) -> f64 {
    Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(1.0 - alpha / 2.0)
}

/// Wilson score interval for a binomial proportion at level `1 − alpha`.
pub fn wilson_ci(successes: usize, n: usize, alpha: f64) -> (f64, f64) {
    assert!(n >= 1 && successes <= n, "wilson_ci needs 0 <= successes <= n, n >= 1");
    let z = z_value(alpha);
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Normal interval around an AUC with the Hanley–McNeil standard error,
/// clipped to `[0, 1]`.
pub fn hanley_mcneil_ci(auc: f64, n_pos: usize, n_neg: usize, alpha: f64) -> (f64, f64) {
    let a = auc;
    let q1 = a / (2.0 - a);
    let q2 = 2.0 * a * a / (1.0 + a);
    let (p, n) = (n_pos as f64, n_neg as f64);
    let var = (a * (1.0 - a) + (p - 1.0) * (q1 - a * a) + (n - 1.0) * (q2 - a * a)) / (p * n);
    let se = var.max(0.0).sqrt();
    let z = z_value(alpha);
    ((a - z * se).clamp(0.0, 1.0), (a + z * se).clamp(0.0, 1.0))
}

/// Percentile bootstrap interval of `metric` over resampled (pred, y) pairs.
/// Resamples on which the metric is undefined are skipped.
pub fn bootstrap_ci(
    pred: &[f64],
    y: &[f64],
    metric: fn(&[f64], &[f64]) -> Result<f64>,
    resamples: usize,
    alpha: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    check_lengths(pred, y)?;
    let n = y.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(resamples);
    let (mut p, mut t) = (vec![0.0; n], vec![0.0; n]);
    for _ in 0..resamples {
        for k in 0..n {
            let i = rng.random_range(0..n);
            p[k] = pred[i];
            t[k] = y[i];
        }
        if let Ok(v) = metric(&p, &t) {
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(SpsmError::Metric("metric undefined on every bootstrap resample".into()));
    }
    values.sort_by(f64::total_cmp);
    let at = |q: f64| values[((q * values.len() as f64).floor() as usize).min(values.len() - 1)];
    Ok((at(alpha / 2.0), at(1.0 - alpha / 2.0)))
}

/// A point estimate with a 95% interval that contains it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    fn new(value: f64, (lo, hi): (f64, f64)) -> Self {
        Interval {
            value,
            lo: lo.min(value),
            hi: hi.max(value),
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} ({:.2}, {:.2})", self.value, self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<Interval>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<Interval>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<Interval>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc: Option<Interval>,
    /// Test rows per mask, in mask order.
    pub pattern_counts: Vec<(String, usize)>,
    pub shared_nonzero: usize,
    pub specific_nonzero: usize,
}

impl EvalReport {
    /// Nonzero coefficients as `"k + l"`.
    pub fn nonzero_label(&self) -> String {
        format!("{} + {}", self.shared_nonzero, self.specific_nonzero)
    }

    /// R² for regression, AUC for classification.
    pub fn primary(&self) -> Option<(&'static str, Interval)> {
        self.r2
            .map(|v| ("r2", v))
            .or_else(|| self.auc.map(|v| ("auc", v)))
    }

    pub fn csv_header() -> &'static str {
        "method,n,metric,value,ci_lo,ci_hi,nonzero"
    }

    /// One CSV line per available metric.
    pub fn csv_lines(&self) -> Vec<String> {
        [
            ("r2", self.r2),
            ("mse", self.mse),
            ("accuracy", self.accuracy),
            ("auc", self.auc),
        ]
        .into_iter()
        .filter_map(|(name, v)| {
            v.map(|v| {
                format!(
                    "{},{},{name},{},{},{},{}",
                    self.method,
                    self.n,
                    v.value,
                    v.lo,
                    v.hi,
                    self.nonzero_label()
                )
            })
        })
        .collect()
    }
}

/// Score a fitted model on held-out data.
pub fn evaluate(model: &FittedModel, test: &Dataset, seed: u64) -> Result<EvalReport> {
    let pred = model.predict_values(test)?;
    let y = test.targets();
    let (k, l) = model.nonzero_counts();
    let mut report = EvalReport {
        method: model.method_name().to_string(),
        n: y.len(),
        r2: None,
        mse: None,
        accuracy: None,
        auc: None,
        pattern_counts: extract_patterns(test)
            .into_iter()
            .map(|(m, c)| (m.to_string(), c))
            .collect(),
        shared_nonzero: k,
        specific_nonzero: l,
    };
    let alpha = 0.05;
    match model.task() {
        Task::Regression => {
            report.r2 = Some(Interval::new(
                r2(&pred, y)?,
                bootstrap_ci(&pred, y, r2, BOOTSTRAP_RESAMPLES, alpha, seed)?,
            ));
            report.mse = Some(Interval::new(
                mse(&pred, y)?,
                bootstrap_ci(&pred, y, mse, BOOTSTRAP_RESAMPLES, alpha, seed)?,
            ));
        }
        Task::Classification => {
            let labels: Vec<f64> = pred.iter().map(|&p| (p >= 0.5) as u8 as f64).collect();
            let correct = labels.iter().zip(y).filter(|(a, b)| a == b).count();
            report.accuracy = Some(Interval::new(
                accuracy(&labels, y)?,
                wilson_ci(correct, y.len(), alpha),
            ));
            let a = auc(&pred, y)?;
            let n_pos = y.iter().filter(|&&t| t == 1.0).count();
            report.auc = Some(Interval::new(
                a,
                hanley_mcneil_ci(a, n_pos, y.len() - n_pos, alpha),
            ));
        }
    }
    Ok(report)
}

/// Row indices of a seeded 64/16/20 train/validation/test split.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (0.64 * n as f64).round() as usize;
    let n_valid = (0.16 * n as f64).round() as usize;
    let test = idx.split_off(n_train + n_valid);
    let valid = idx.split_off(n_train);
    (idx, valid, test)
}

pub fn split(ds: &Dataset, seed: u64) -> (Dataset, Dataset, Dataset) {
    let (a, b, c) = split_indices(ds.n_rows(), seed);
    (ds.subset(&a), ds.subset(&b), ds.subset(&c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Spsm,
    Psm,
    FullSharing,
    ImputedZero,
    ImputedMean,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Spsm,
        Method::Psm,
        Method::FullSharing,
        Method::ImputedZero,
        Method::ImputedMean,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Spsm => "spsm",
            Method::Psm => "psm",
            Method::FullSharing => "full_sharing",
            Method::ImputedZero => "imputed_zero",
            Method::ImputedMean => "imputed_mean",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = SpsmError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                SpsmError::Config(format!(
                    "unknown method {s:?}, expected one of spsm, psm, full_sharing, imputed_zero, imputed_mean"
                ))
            })
    }
}

/// One grid point. Methods read only the coordinates they use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub gamma: f64,
    pub lambda: f64,
    pub ridge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub gammas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub ridge: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            gammas: DEFAULT_GAMMAS.to_vec(),
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            ridge: DEFAULT_RIDGE.to_vec(),
        }
    }
}

impl Grid {
    pub fn single(cell: Cell) -> Self {
        Grid {
            gammas: vec![cell.gamma],
            lambdas: vec![cell.lambda],
            ridge: vec![cell.ridge],
        }
    }

    /// Cells relevant to `method`: γ × λ for SPSM, γ for full sharing, the
    /// ridge weights otherwise.
    pub fn cells(&self, method: Method) -> Vec<Cell> {
        let g0 = self.gammas.first().copied().unwrap_or(0.0);
        let l0 = self.lambdas.first().copied().unwrap_or(0.0);
        let r0 = self.ridge.first().copied().unwrap_or(0.0);
        match method {
            Method::Spsm => self
                .gammas
                .iter()
                .flat_map(|&gamma| {
                    self.lambdas.iter().map(move |&lambda| Cell {
                        gamma,
                        lambda,
                        ridge: r0,
                    })
                })
                .collect(),
            Method::FullSharing => self
                .gammas
                .iter()
                .map(|&gamma| Cell {
                    gamma,
                    lambda: l0,
                    ridge: r0,
                })
                .collect(),
            Method::Psm | Method::ImputedZero | Method::ImputedMean => self
                .ridge
                .iter()
                .map(|&ridge| Cell {
                    gamma: g0,
                    lambda: l0,
                    ridge,
                })
                .collect(),
        }
    }
}

/// Everything needed to fit one method apart from the grid coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: Method,
    /// Task, norm, solver tolerances and intercept options; γ and λ are
    /// overwritten by the grid.
    pub base: Hyperparameters,
    pub min_pattern_n: usize,
    /// PSM minimum pattern size; `None` means twice the feature count.
    pub cc_threshold: Option<usize>,
    pub fallback: FallbackPolicy,
}

impl MethodConfig {
    pub fn new(method: Method, task: Task) -> Self {
        MethodConfig {
            method,
            base: Hyperparameters::default().with_task(task),
            min_pattern_n: 0,
            cc_threshold: None,
            fallback: FallbackPolicy::default(),
        }
    }
}

pub fn fit_method(train: &Dataset, cfg: &MethodConfig, cell: Cell) -> Result<FittedModel> {
    let task = cfg.base.task;
    let with_fallback = |mut m: crate::spsm::SpsmModel| {
        m.registry = m.registry.with_fallback(cfg.fallback);
        m
    };
    Ok(match cfg.method {
        Method::Spsm => {
            let registry = registry_for(train, cfg.min_pattern_n, cfg.fallback)?;
            let hp = Hyperparameters {
                gamma: cell.gamma,
                lambda: cell.lambda,
                ..cfg.base.clone()
            };
            FittedModel::Spsm(fit(train, &registry, &hp)?)
        }
        Method::Psm => FittedModel::Psm(with_fallback(fit_psm(
            train,
            cell.ridge,
            cfg.cc_threshold,
            &cfg.base,
        )?)),
        Method::FullSharing => FittedModel::FullSharing(with_fallback(fit_full_sharing(
            train,
            cell.gamma,
            cfg.base.pattern_intercepts,
            &cfg.base,
        )?)),
        Method::ImputedZero | Method::ImputedMean => {
            let imputer = if cfg.method == Method::ImputedZero {
                Imputer::Zero
            } else {
                Imputer::Mean
            };
            let m = fit_imputed(train, imputer, cell.ridge, task, &cfg.base)?;
            match task {
                Task::Regression => FittedModel::ImputedRidge(m),
                Task::Classification => FittedModel::ImputedLogistic(m),
            }
        }
    })
}

/// Validation score where larger is better: −MSE or AUC.
fn validation_score(model: &FittedModel, valid: &Dataset) -> Result<f64> {
    let pred = model.predict_values(valid)?;
    match model.task() {
        Task::Regression => Ok(-mse(&pred, valid.targets())?),
        Task::Classification => auc(&pred, valid.targets()),
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    /// Validation MSE (regression) or AUC (classification).
    pub score: std::result::Result<f64, String>,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub best: Cell,
    pub model: FittedModel,
    /// Every evaluated cell in grid order.
    pub cells: Vec<CellResult>,
}

/// Index of the highest score; ties go to the smaller λ, then γ, then
/// ridge weight.
fn select_best(scores: impl IntoIterator<Item = (Cell, f64)>) -> Option<usize> {
    let key = |c: &Cell| (c.lambda, c.gamma, c.ridge);
    let mut best: Option<(usize, Cell, f64)> = None;
    for (i, (cell, score)) in scores.into_iter().enumerate() {
        let better = match &best {
            None => true,
            Some((_, b, s)) => match score.total_cmp(s) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => key(&cell) < key(b),
            },
        };
        if better {
            best = Some((i, cell, score));
        }
    }
    best.map(|b| b.0)
}

/// Fit every cell on `train`, pick the best on `valid`. Ties go to the
/// smaller λ, then the smaller γ, then the smaller ridge weight.
pub fn grid_search(
    train: &Dataset,
    valid: &Dataset,
    grid: &Grid,
    cfg: &MethodConfig,
) -> Result<GridOutcome> {
    let cells = grid.cells(cfg.method);
    if cells.is_empty() {
        return Err(SpsmError::Config(format!("empty grid for {}", cfg.method)));
    }
    let fitted: Vec<(Cell, Result<(FittedModel, f64)>)> = cells
        .par_iter()
        .map(|&cell| {
            let out = fit_method(train, cfg, cell).and_then(|m| {
                let s = validation_score(&m, valid)?;
                Ok((m, s))
            });
            (cell, out)
        })
        .collect();

    let mut first_error = None;
    let mut scored = Vec::with_capacity(fitted.len());
    for (i, (cell, out)) in fitted.iter().enumerate() {
        match out {
            Ok((_, score)) if score.is_finite() => scored.push((i, *cell, *score)),
            Ok(_) => log::warn!("{} {cell:?}: non-finite validation score", cfg.method),
            Err(e) => {
                log::warn!("{} {cell:?}: {e}", cfg.method);
                first_error.get_or_insert_with(|| e.to_string());
            }
        }
    }
    let best = select_best(scored.iter().map(|&(_, c, s)| (c, s))).map(|k| scored[k].0);
    let (best_cell, model) = best
        .map(|i| match &fitted[i] {
            (cell, Ok((model, _))) => (*cell, model),
            _ => unreachable!("only successful cells are scored"),
        })
        .ok_or_else(|| {
        SpsmError::Fit {
            iteration: 0,
            message: format!(
                "no grid cell produced a usable model for {}: {}",
                cfg.method,
                first_error.clone().unwrap_or_else(|| "non-finite scores".into())
            ),
        }
    })?;
    let model = model.clone();
    let score_of = |out: &Result<(FittedModel, f64)>| match out {
        Ok((m, s)) => Ok(match m.task() {
            Task::Regression => -s,
            Task::Classification => *s,
        }),
        Err(e) => Err(e.to_string()),
    };
    Ok(GridOutcome {
        best: best_cell,
        model,
        cells: fitted
            .iter()
            .map(|(cell, out)| CellResult {
                cell: *cell,
                score: score_of(out),
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub method: String,
    pub fraction: f64,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Nonzero counts of the selected model, `None` for failed cells.
    #[serde(skip)]
    pub nonzero: Option<(usize, usize)>,
    #[serde(skip)]
    pub error: Option<String>,
}

impl CurveRow {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// For every (method, fraction, seed): split with `seed`, keep the first
/// `fraction` of the shuffled training rows, grid-search on the validation
/// rows and score on the test rows. Failed cells become rows with NaN values.
pub fn learning_curve(
    ds: &Dataset,
    fractions: &[f64],
    seeds: &[u64],
    methods: &[MethodConfig],
    grid: &Grid,
) -> Result<Vec<CurveRow>> {
    if seeds.is_empty() || fractions.is_empty() || methods.is_empty() {
        return Err(SpsmError::Config(
            "learning curve needs at least one fraction, seed and method".into(),
        ));
    }
    if let Some(f) = fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
        return Err(SpsmError::Config(format!("fraction {f} outside (0, 1]")));
    }
    let jobs: Vec<(&MethodConfig, f64, u64)> = methods
        .iter()
        .flat_map(|m| {
            fractions
                .iter()
                .flat_map(move |&f| seeds.iter().map(move |&s| (m, f, s)))
        })
        .collect();
    let mut rows: Vec<CurveRow> = jobs
        .par_iter()
        .map(|&(cfg, fraction, seed)| curve_cell(ds, cfg, grid, fraction, seed))
        .collect();
    rows.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.fraction.total_cmp(&b.fraction))
            .then(a.seed.cmp(&b.seed))
    });
    Ok(rows)
}

fn curve_cell(ds: &Dataset, cfg: &MethodConfig, grid: &Grid, fraction: f64, seed: u64) -> CurveRow {
    let metric = match cfg.base.task {
        Task::Regression => "r2",
        Task::Classification => "auc",
    };
    let run = || -> Result<EvalReport> {
        let (train_idx, valid_idx, test_idx) = split_indices(ds.n_rows(), seed);
        let keep = ((fraction * train_idx.len() as f64).round() as usize).clamp(1, train_idx.len());
        let train = ds.subset(&train_idx[..keep]);
        if cfg.base.task == Task::Classification {
            let positives = train.targets().iter().filter(|&&t| t == 1.0).count();
            if positives == 0 || positives == train.n_rows() {
                return Err(SpsmError::Validation(format!(
                    "training subset of {keep} rows contains a single class"
                )));
            }
        }
        let valid = ds.subset(&valid_idx);
        let test = ds.subset(&test_idx);
        let outcome = grid_search(&train, &valid, grid, cfg)?;
        evaluate(&outcome.model, &test, seed)
    };
    match run() {
        Ok(report) => {
            let (_, v) = report.primary().expect("report has a primary metric");
            CurveRow {
                method: cfg.method.name().into(),
                fraction,
                seed,
                metric: metric.into(),
                value: v.value,
                ci_lo: v.lo,
                ci_hi: v.hi,
                nonzero: Some((report.shared_nonzero, report.specific_nonzero)),
                error: None,
            }
        }
        Err(e) => {
            log::warn!("{} fraction {fraction} seed {seed} failed: {e}", cfg.method);
            CurveRow {
                method: cfg.method.name().into(),
                fraction,
                seed,
                metric: metric.into(),
                value: f64::NAN,
                ci_lo: f64::NAN,
                ci_hi: f64::NAN,
                nonzero: None,
                error: Some(e.to_string()),
            }
        }
    }
}

pub fn write_curve_csv<W: Write>(rows: &[CurveRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["method", "fraction", "seed", "metric", "value", "ci_lo", "ci_hi"])?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.fraction.to_string(),
            r.seed.to_string(),
            r.metric.clone(),
            r.value.to_string(),
            r.ci_lo.to_string(),
            r.ci_hi.to_string(),
        ])?;
    }
    w.flush().map_err(|e| SpsmError::io("<curve csv>", e))?;
    Ok(())
}
