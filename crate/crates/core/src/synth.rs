//! Simulated data: cluster-covariance Gaussian features, a linear outcome
//! driven by one representative feature per cluster, and three missingness
//! settings.
//!
//! Every draw comes from a single `ChaCha8Rng` stream in a fixed order: the
//! `k` representative coefficients, then per row the `d` feature normals,
//! the noise term, and finally that row's missingness draws.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{numeric_schema, Dataset, PatternMask};
use crate::error::{Result, SpsmError};
use crate::oracle::LinearGaussianDgp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Setting {
    /// Whole cluster missing when its representative exceeds the threshold.
    A,
    /// As `A`, but one uniformly chosen feature per masked cluster survives.
    B,
    /// Each cell missing independently with probability `mcar_p`.
    C,
}

impl std::str::FromStr for Setting {
    type Err = SpsmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Setting::A),
            "B" | "b" => Ok(Setting::B),
            "C" | "c" => Ok(Setting::C),
            _ => Err(SpsmError::Config(format!("unknown setting {s:?}, expected A, B or C"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub d: usize,
    pub k: usize,
    pub c: f64,
    pub setting: Setting,
    pub mcar_p: f64,
    pub threshold: f64,
    pub n: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            d: 20,
            k: 5,
            c: 0.95,
            setting: Setting::A,
            mcar_p: 0.2,
            threshold: -0.5,
            n: 2000,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.d == 0 || !self.d.is_multiple_of(self.k) {
            return Err(SpsmError::Config(format!(
                "k must divide d (d = {}, k = {})",
                self.d, self.k
            )));
        }
        if !(0.0..1.0).contains(&self.c) {
            return Err(SpsmError::Config(format!("c must be in [0, 1), got {}", self.c)));
        }
        if !(0.0..=1.0).contains(&self.mcar_p) {
            return Err(SpsmError::Config(format!(
                "mcar_p must be in [0, 1], got {}",
                self.mcar_p
            )));
        }
        if !self.threshold.is_finite() {
            return Err(SpsmError::Config("threshold must be finite".into()));
        }
        Ok(())
    }

    pub fn cluster_size(&self) -> usize {
        self.d / self.k
    }

    /// Index of the feature representing cluster `c` in the outcome.
    pub fn representative(&self, cluster: usize) -> usize {
        cluster * self.cluster_size()
    }
}

/// Block-diagonal equicorrelation matrix: `k` blocks of size `d/k` with unit
/// diagonal and `c` off the diagonal.
pub fn cluster_covariance(d: usize, k: usize, c: f64) -> Result<DMatrix<f64>> {
    if k == 0 || d == 0 || !d.is_multiple_of(k) {
        return Err(SpsmError::Config(format!("k must divide d (d = {d}, k = {k})")));
    }
    let b = d / k;
    let lower = if b > 1 { -1.0 / (b as f64 - 1.0) } else { f64::NEG_INFINITY };
    if !(c > lower && c < 1.0) {
        return Err(SpsmError::Config(format!(
            "c = {c} outside the positive definite range ({lower}, 1) for blocks of size {b}"
        )));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else if i / b == j / b {
            c
        } else {
            0.0
        }
    }))
}

/// A simulated sample together with its ground truth.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub dataset: Dataset,
    pub theta: Vec<f64>,
    pub sigma: DMatrix<f64>,
    /// Feature values before masking.
    pub latent: Vec<Vec<f64>>,
}

impl Simulation {
    pub fn masks(&self) -> &[PatternMask] {
        self.dataset.masks()
    }
}

/// Ground truth written next to simulated CSV files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimMetadata {
    pub config: SimConfig,
    pub theta: Vec<f64>,
    pub representatives: Vec<usize>,
}

impl SimMetadata {
    pub fn new(config: &SimConfig, theta: &[f64]) -> Self {
        SimMetadata {
            config: config.clone(),
            theta: theta.to_vec(),
            representatives: (0..config.k).map(|c| config.representative(c)).collect(),
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn draw_features(rng: &mut ChaCha8Rng, mu: &DVector<f64>, chol: &DMatrix<f64>) -> Vec<f64> {
    let z = DVector::from_fn(mu.len(), |_, _| normal(rng));
    (mu + chol * z).iter().copied().collect()
}

fn assemble(
    latent: &[Vec<f64>],
    masks: Vec<PatternMask>,
    targets: Vec<f64>,
) -> Result<Dataset> {
    let d = latent.first().map_or(0, Vec::len);
    let rows = latent
        .iter()
        .zip(&masks)
        .map(|(x, m)| {
            x.iter()
                .enumerate()
                .map(|(j, &v)| if m.is_missing(j) { None } else { Some(v) })
                .collect()
        })
        .collect();
    Dataset::new(numeric_schema(d), rows, targets, masks)
}

pub fn sample(cfg: &SimConfig) -> Result<Simulation> {
    cfg.validate()?;
    let (d, k, b) = (cfg.d, cfg.k, cfg.cluster_size());
    let sigma = cluster_covariance(d, k, cfg.c)?;
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| SpsmError::Internal("cluster covariance not positive definite".into()))?
        .unpack();
    let mu = DVector::zeros(d);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut theta = vec![0.0; d];
    for cluster in 0..k {
        theta[cfg.representative(cluster)] = normal(&mut rng);
    }

    let mut latent = Vec::with_capacity(cfg.n);
    let mut targets = Vec::with_capacity(cfg.n);
    let mut masks = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let x = draw_features(&mut rng, &mu, &chol);
        let eps = normal(&mut rng);
        targets.push(theta.iter().zip(&x).map(|(t, v)| t * v).sum::<f64>() + eps);

        let mut bits = vec![false; d];
        match cfg.setting {
            Setting::A | Setting::B => {
                for cluster in 0..k {
                    if x[cfg.representative(cluster)] > cfg.threshold {
                        let start = cluster * b;
                        bits[start..start + b].fill(true);
                        if cfg.setting == Setting::B {
                            bits[start + rng.random_range(0..b)] = false;
                        }
                    }
                }
            }
            Setting::C => {
                for bit in bits.iter_mut() {
                    *bit = rng.random_bool(cfg.mcar_p);
                }
            }
        }
        masks.push(PatternMask::new(bits));
        latent.push(x);
    }

    let dataset = assemble(&latent, masks, targets)?;
    Ok(Simulation {
        dataset,
        theta,
        sigma,
        latent,
    })
}

/// Sample from a linear-Gaussian DGP with masks drawn independently of the
/// features, pattern `m` chosen with probability proportional to its weight.
pub fn sample_dgp(
    dgp: &LinearGaussianDgp,
    patterns: &[(PatternMask, f64)],
    n: usize,
    seed: u64,
) -> Result<Simulation> {
    let d = dgp.dim();
    if patterns.is_empty() || patterns.iter().any(|(m, _)| m.len() != d) {
        return Err(SpsmError::Config(format!(
            "need at least one pattern of length {d}"
        )));
    }
    let weights = WeightedIndex::new(patterns.iter().map(|(_, w)| *w))
        .map_err(|e| SpsmError::Config(format!("pattern weights: {e}")))?;
    let chol = dgp
        .sigma
        .clone()
        .cholesky()
        .ok_or_else(|| SpsmError::Oracle("sigma is not positive definite".into()))?
        .unpack();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut latent = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    let mut masks = Vec::with_capacity(n);
    for _ in 0..n {
        let x = draw_features(&mut rng, &dgp.mu, &chol);
        let eps = normal(&mut rng);
        let mask = patterns[weights.sample(&mut rng)].0.clone();
        let linear: f64 = dgp.theta.iter().zip(&x).map(|(t, v)| t * v).sum();
        targets.push(linear + dgp.alpha_for(&mask) + dgp.sigma_y * eps);
        masks.push(mask);
        latent.push(x);
    }
    let dataset = assemble(&latent, masks, targets)?;
    Ok(Simulation {
        dataset,
        theta: dgp.theta.iter().copied().collect(),
        sigma: dgp.sigma.clone(),
        latent,
    })
}
