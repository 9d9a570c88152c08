//! The coupled SPSM objective over a dataset grouped by pattern.

use super::{Hyperparameters, MainNorm, SpsmParams, Task};
use crate::data::Dataset;
use crate::error::{Result, SpsmError};
use crate::patterns::PatternRegistry;
use crate::prox::{power_iteration, soft_threshold, CompositeObjective};

/// Rows of one pattern, restricted to the encoded columns it observes.
#[derive(Debug)]
struct Block {
    observed: Vec<usize>,
    /// Row-major `n_rows × observed.len()`.
    x: Vec<f64>,
    y: Vec<f64>,
    lambda: f64,
    /// Offset of Δ in the flat parameter vector when the pattern is specialized.
    delta_at: Option<usize>,
    alpha_at: Option<usize>,
}

impl Block {
    fn n_rows(&self) -> usize {
        self.y.len()
    }

    fn width(&self) -> usize {
        self.observed.len()
    }
}

/// Flat parameter layout: `θ (p) | b | per specialized pattern: Δ (d_m), α`.
#[derive(Debug)]
pub struct SpsmProblem {
    task: Task,
    main_norm: MainNorm,
    gamma: f64,
    delta_ridge: f64,
    n_features: usize,
    n_rows: usize,
    blocks: Vec<Block>,
    dim: usize,
}

fn squared(s: f64, y: f64) -> (f64, f64) {
    let r = s - y;
    (r * r, 2.0 * r)
}

fn logistic(s: f64, y: f64) -> (f64, f64) {
    // log(1 + e^s) - y s, stable for large |s|
    let softplus = s.max(0.0) + (-s.abs()).exp().ln_1p();
    let p = if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    };
    (softplus - y * s, p - y)
}

impl SpsmProblem {
    pub fn new(ds: &Dataset, registry: &PatternRegistry, hp: &Hyperparameters) -> Result<Self> {
        hp.validate()?;
        if ds.is_empty() {
            return Err(SpsmError::Validation("cannot fit an empty dataset".into()));
        }
        if hp.task == Task::Classification {
            if let Some(i) = ds.targets().iter().position(|&t| t != 0.0 && t != 1.0) {
                return Err(SpsmError::Validation(format!(
                    "row {}: classification target {} is not 0 or 1",
                    i + 1,
                    ds.targets()[i]
                )));
            }
        }
        let schema = ds.schema();
        let p = schema.n_encoded();
        let mut blocks: Vec<Block> = registry
            .entries()
            .iter()
            .map(|e| Block {
                observed: schema.observed_encoded(&e.mask),
                x: Vec::new(),
                y: Vec::new(),
                lambda: hp.lambda_for(e.id),
                delta_at: None,
                alpha_at: None,
            })
            .collect();
        for (i, mask) in ds.masks().iter().enumerate() {
            let id = registry.id_of(mask).ok_or_else(|| {
                SpsmError::Validation(format!("row {} has unregistered pattern {mask}", i + 1))
            })?;
            let b = &mut blocks[id];
            let row = &ds.rows()[i];
            b.x.extend(b.observed.iter().map(|&j| row[j].expect("observed cell")));
            b.y.push(ds.targets()[i]);
        }
        let mut dim = p + 1;
        for (b, e) in blocks.iter_mut().zip(registry.entries()) {
            if !e.specialized || b.n_rows() == 0 {
                continue;
            }
            b.delta_at = Some(dim);
            dim += b.width();
            if hp.pattern_intercepts {
                b.alpha_at = Some(dim);
                dim += 1;
            }
        }
        Ok(SpsmProblem {
            task: hp.task,
            main_norm: hp.main_norm,
            gamma: hp.gamma,
            delta_ridge: hp.delta_ridge,
            n_features: p,
            n_rows: ds.n_rows(),
            blocks,
            dim,
        })
    }

    pub fn n_params(&self) -> usize {
        self.dim
    }

    pub fn zeros(&self) -> Vec<f64> {
        vec![0.0; self.dim]
    }

    pub fn pack(&self, params: &SpsmParams) -> Vec<f64> {
        let p = self.n_features;
        let mut x = self.zeros();
        x[..p].copy_from_slice(&params.theta);
        x[p] = params.intercept;
        for (k, b) in self.blocks.iter().enumerate() {
            if let Some(at) = b.delta_at {
                x[at..at + b.width()].copy_from_slice(&params.deltas[k]);
            }
            if let Some(at) = b.alpha_at {
                x[at] = params.alphas[k];
            }
        }
        x
    }

    pub fn unpack(&self, x: &[f64]) -> SpsmParams {
        let p = self.n_features;
        SpsmParams {
            theta: x[..p].to_vec(),
            intercept: x[p],
            deltas: self
                .blocks
                .iter()
                .map(|b| match b.delta_at {
                    Some(at) => x[at..at + b.width()].to_vec(),
                    None => vec![0.0; b.width()],
                })
                .collect(),
            alphas: self
                .blocks
                .iter()
                .map(|b| b.alpha_at.map_or(0.0, |at| x[at]))
                .collect(),
        }
    }

    /// Mean of `loss(score, y)` over all rows; accumulates the gradient of
    /// that mean into `grad` when given.
    fn pass(
        &self,
        x: &[f64],
        loss: impl Fn(f64, f64) -> (f64, f64),
        mut grad: Option<&mut [f64]>,
    ) -> f64 {
        let p = self.n_features;
        let inv_n = 1.0 / self.n_rows as f64;
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let mut total = 0.0;
        let mut coef = Vec::new();
        let mut acc = Vec::new();
        for b in &self.blocks {
            let w = b.width();
            coef.clear();
            coef.extend(b.observed.iter().map(|&j| x[j]));
            if let Some(at) = b.delta_at {
                for (c, d) in coef.iter_mut().zip(&x[at..at + w]) {
                    *c += d;
                }
            }
            let offset = x[p] + b.alpha_at.map_or(0.0, |at| x[at]);
            acc.clear();
            acc.resize(w, 0.0);
            let mut acc_bias = 0.0;
            for (i, &y) in b.y.iter().enumerate() {
                let row = &b.x[i * w..(i + 1) * w];
                let s = offset + row.iter().zip(&coef).map(|(a, c)| a * c).sum::<f64>();
                let (l, dl) = loss(s, y);
                total += l;
                if grad.is_some() {
                    acc_bias += dl;
                    for (a, v) in acc.iter_mut().zip(row) {
                        *a += dl * v;
                    }
                }
            }
            if let Some(g) = grad.as_deref_mut() {
                g[p] += acc_bias * inv_n;
                for (&j, a) in b.observed.iter().zip(&acc) {
                    g[j] += a * inv_n;
                }
                if let Some(at) = b.delta_at {
                    for (gd, a) in g[at..at + w].iter_mut().zip(&acc) {
                        *gd += a * inv_n;
                    }
                }
                if let Some(at) = b.alpha_at {
                    g[at] += acc_bias * inv_n;
                }
            }
        }
        total * inv_n
    }

    fn data_term(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        match self.task {
            Task::Regression => self.pass(x, squared, grad),
            Task::Classification => self.pass(x, logistic, grad),
        }
    }

    /// All penalty terms: `γ/n ‖θ‖ + Σ λ_m/n_m ‖Δ_m‖₁ + Σ (n_m/n) ρ ‖Δ_m‖²`.
    pub fn penalty(&self, x: &[f64]) -> f64 {
        let n = self.n_rows as f64;
        let theta = &x[..self.n_features];
        let main = match self.main_norm {
            MainNorm::L1 => theta.iter().map(|v| v.abs()).sum::<f64>(),
            MainNorm::L2Squared => theta.iter().map(|v| v * v).sum::<f64>(),
        };
        let mut total = self.gamma / n * main;
        for b in &self.blocks {
            if let Some(at) = b.delta_at {
                let delta = &x[at..at + b.width()];
                let nm = b.n_rows() as f64;
                total += b.lambda / nm * delta.iter().map(|v| v.abs()).sum::<f64>();
                if self.delta_ridge > 0.0 {
                    total += nm / n * self.delta_ridge * delta.iter().map(|v| v * v).sum::<f64>();
                }
            }
        }
        total
    }

    /// Full objective at a flat parameter vector.
    pub fn objective_flat(&self, x: &[f64]) -> f64 {
        self.data_term(x, None) + self.penalty(x)
    }

    pub fn objective(&self, params: &SpsmParams) -> f64 {
        self.objective_flat(&self.pack(params))
    }

    /// Gradient of the differentiable part: the data term plus the squared-ℓ2
    /// main penalty (when selected) and any ridge on Δ. ℓ1 terms are excluded.
    pub fn smooth_gradient_flat(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let n = self.n_rows as f64;
        let mut g = self.zeros();
        let mut f = self.data_term(x, Some(&mut g));
        if self.main_norm == MainNorm::L2Squared {
            for j in 0..self.n_features {
                f += self.gamma / n * x[j] * x[j];
                g[j] += 2.0 * self.gamma / n * x[j];
            }
        }
        if self.delta_ridge > 0.0 {
            for b in &self.blocks {
                if let Some(at) = b.delta_at {
                    let scale = b.n_rows() as f64 / n * self.delta_ridge;
                    for i in at..at + b.width() {
                        f += scale * x[i] * x[i];
                        g[i] += 2.0 * scale * x[i];
                    }
                }
            }
        }
        (f, g)
    }

    /// Value of the smooth part whose gradient is [`Self::smooth_gradient_flat`].
    pub fn smooth_value_flat(&self, x: &[f64]) -> f64 {
        self.smooth_gradient_flat(x).0
    }

    pub fn smooth_gradient(&self, params: &SpsmParams) -> SpsmParams {
        let (_, g) = self.smooth_gradient_flat(&self.pack(params));
        self.unpack(&g)
    }

    /// Upper-bound estimate of the data-term gradient's Lipschitz constant.
    fn data_lipschitz(&self) -> f64 {
        let curvature = match self.task {
            Task::Regression => 2.0,
            Task::Classification => 0.25,
        };
        let top = power_iteration(
            |v| {
                let mut out = vec![0.0; self.dim];
                self.pass(v, |s, _| (0.0, s), Some(&mut out));
                out
            },
            self.dim,
            30,
        );
        curvature * top
    }
}

/// The solver sees only the data term as smooth; every penalty, including the
/// squared-ℓ2 ones, is applied through its exact proximal map so that very
/// large γ does not shrink the step for the whole parameter vector.
impl CompositeObjective for SpsmProblem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn smooth_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.data_term(x, Some(grad))
    }

    fn smooth_value(&self, x: &[f64]) -> f64 {
        self.data_term(x, None)
    }

    fn prox_value(&self, x: &[f64]) -> f64 {
        self.penalty(x)
    }

    fn prox(&self, x: &mut [f64], step: f64) {
        let n = self.n_rows as f64;
        let main = step * self.gamma / n;
        for v in &mut x[..self.n_features] {
            *v = match self.main_norm {
                MainNorm::L1 => soft_threshold(*v, main),
                MainNorm::L2Squared => *v / (1.0 + 2.0 * main),
            };
        }
        for b in &self.blocks {
            if let Some(at) = b.delta_at {
                let nm = b.n_rows() as f64;
                let threshold = step * b.lambda / nm;
                let shrink = 1.0 + 2.0 * step * nm / n * self.delta_ridge;
                for v in &mut x[at..at + b.width()] {
                    *v = soft_threshold(*v, threshold) / shrink;
                }
            }
        }
    }

    fn lipschitz_hint(&self) -> f64 {
        self.data_lipschitz()
    }
}
