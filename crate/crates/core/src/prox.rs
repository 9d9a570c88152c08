//! Accelerated proximal gradient descent for composite convex objectives
//! `f(x) + g(x)` with smooth `f` and prox-friendly `g`.
//!
//! Momentum follows FISTA with a function-value restart: a candidate that
//! raises the objective is discarded and momentum is reset, so accepted
//! iterates never increase the objective. The step is `1/L` with `L` grown by
//! backtracking until the quadratic upper bound holds.

use crate::error::{Result, SpsmError};
use crate::linalg::{dot, norm2_sq};

pub trait CompositeObjective {
    fn dim(&self) -> usize;

    /// Smooth part; writes its gradient into `grad`.
    fn smooth_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;

    fn smooth_value(&self, x: &[f64]) -> f64;

    /// Nonsmooth (or prox-handled) part.
    fn prox_value(&self, x: &[f64]) -> f64;

    /// In-place proximal map of `step * g`.
    fn prox(&self, x: &mut [f64], step: f64);

    /// Initial guess for the Lipschitz constant of the smooth gradient.
    fn lipschitz_hint(&self) -> f64;

    fn value(&self, x: &[f64]) -> f64 {
        self.smooth_value(x) + self.prox_value(x)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ProxOptions {
    /// Stop once a plain (momentum-free) step changes the objective by less
    /// than this fraction.
    pub tol: f64,
    pub max_iter: usize,
    /// Multiplier applied to the step on a failed sufficient-decrease check.
    pub backtrack: f64,
}

impl Default for ProxOptions {
    fn default() -> Self {
        ProxOptions {
            tol: 1e-8,
            max_iter: 10_000,
            backtrack: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProxReport {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restarts: usize,
    /// Objective after each accepted iterate, starting with the initial point.
    pub trace: Vec<f64>,
}

pub fn minimize<P: CompositeObjective + ?Sized>(
    problem: &P,
    x0: Vec<f64>,
    opts: &ProxOptions,
) -> Result<ProxReport> {
    let n = problem.dim();
    assert_eq!(x0.len(), n, "initial point has wrong dimension");
    let mut x = x0;
    let mut fx = problem.value(&x);
    if !fx.is_finite() {
        return Err(SpsmError::Fit {
            iteration: 0,
            message: format!("initial objective is {fx}"),
        });
    }
    let mut trace = vec![fx];
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut lip = problem.lipschitz_hint().max(1e-12);
    let mut grad = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut diff = vec![0.0; n];
    let mut plain_step = true;
    let mut restarts = 0;
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=opts.max_iter {
        iterations = k;
        let fy = problem.smooth_grad(&y, &mut grad);
        let fz = loop {
            let step = 1.0 / lip;
            for i in 0..n {
                z[i] = y[i] - step * grad[i];
            }
            problem.prox(&mut z, step);
            let fz = problem.smooth_value(&z);
            for i in 0..n {
                diff[i] = z[i] - y[i];
            }
            let bound = fy + dot(&grad, &diff) + 0.5 * lip * norm2_sq(&diff);
            let slack = 1e-12 * fy.abs().max(fz.abs()).max(1e-300);
            if fz <= bound + slack {
                break fz;
            }
            lip /= opts.backtrack;
            if !lip.is_finite() {
                return Err(SpsmError::Fit {
                    iteration: k,
                    message: "step size underflow in backtracking".into(),
                });
            }
        };
        let f_new = fz + problem.prox_value(&z);
        if !f_new.is_finite() {
            return Err(SpsmError::Fit {
                iteration: k,
                message: format!("objective became {f_new}"),
            });
        }

        if f_new > fx {
            // Momentum overshot: restart from the last accepted iterate.
            y.copy_from_slice(&x);
            t = 1.0;
            restarts += 1;
            if plain_step {
                // Even a plain step cannot decrease the objective.
                converged = true;
                break;
            }
            plain_step = true;
            continue;
        }

        let rel = (fx - f_new) / fx.abs().max(f64::MIN_POSITIVE);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        for i in 0..n {
            let prev = x[i];
            x[i] = z[i];
            y[i] = z[i] + beta * (z[i] - prev);
        }
        fx = f_new;
        trace.push(fx);

        if rel < opts.tol {
            if plain_step {
                converged = true;
                break;
            }
            // Confirm with a momentum-free step before stopping.
            y.copy_from_slice(&x);
            t = 1.0;
            plain_step = true;
        } else {
            t = t_next;
            plain_step = false;
        }
    }

    Ok(ProxReport {
        x,
        objective: fx,
        iterations,
        converged,
        restarts,
        trace,
    })
}

/// Largest eigenvalue of a symmetric positive semidefinite operator by power
/// iteration from a fixed start vector.
pub fn power_iteration(apply: impl Fn(&[f64]) -> Vec<f64>, dim: usize, iters: usize) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..dim).map(|i| 1.0 + 0.01 * (i % 7) as f64).collect();
    let norm = norm2_sq(&v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let mut estimate = 0.0;
    for _ in 0..iters {
        let w = apply(&v);
        let norm = norm2_sq(&w).sqrt();
        estimate = dot(&v, &w);
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        v = w.into_iter().map(|x| x / norm).collect();
    }
    estimate.max(0.0)
}

/// Soft-thresholding, the proximal map of `threshold * |x|`.
#[inline]
pub fn soft_threshold(x: f64, threshold: f64) -> f64 {
    if x > threshold {
        x - threshold
    } else if x < -threshold {
        x + threshold
    } else {
        0.0
    }
}
