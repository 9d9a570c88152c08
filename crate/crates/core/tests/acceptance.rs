//! Acceptance criteria. Runs as a plain binary so every criterion prints one
//! PASS/FAIL line; the process exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use spsm_core::baselines::{fit_full_sharing, fit_imputed, Imputer};
use spsm_core::data::{numeric_schema, standardize};
use spsm_core::eval::{
    auc, evaluate, hanley_mcneil_ci, learning_curve, split, wilson_ci, Cell, Grid, Method,
    MethodConfig,
};
use spsm_core::prox::{minimize, ProxOptions};
use spsm_core::spsm::{fit, registry_for, SpsmParams, SpsmProblem, EFFECTIVELY_INFINITE};
use spsm_core::synth::{sample, sample_dgp, SimConfig, Setting};
use spsm_core::{
    Dataset, FallbackPolicy, FittedModel, Hyperparameters, LinearGaussianDgp, MainNorm,
    PatternMask, PatternRegistry, Task,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn m(s: &str) -> PatternMask {
    s.parse().unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn dgp_with_blocks(
    mu: Vec<f64>,
    blocks: &[(&[usize], f64)],
    theta: Vec<f64>,
    alpha: &[(&str, f64)],
) -> LinearGaussianDgp {
    let d = mu.len();
    let mut sigma = DMatrix::identity(d, d);
    for (members, c) in blocks {
        for &i in *members {
            for &j in *members {
                if i != j {
                    sigma[(i, j)] = *c;
                }
            }
        }
    }
    let alpha = alpha.iter().map(|(k, v)| (m(k), *v)).collect();
    LinearGaussianDgp::new(mu, sigma, theta, alpha, 1.0).unwrap()
}

fn oracle_consistency() -> Outcome {
    let dgp = dgp_with_blocks(
        vec![0.5, -0.3, 0.2, 0.0, 1.0],
        &[(&[0, 1, 2], 0.6)],
        vec![1.0, -0.5, 0.8, 0.3, -1.2],
        &[("00100", 0.4), ("01001", -0.3)],
    );
    let patterns = [(m("00000"), 1.0), (m("00100"), 1.0), (m("01001"), 1.0)];
    let ds = sample_dgp(&dgp, &patterns, 50_000, 11).unwrap().dataset;
    let registry = registry_for(&ds, 0, FallbackPolicy::Error).unwrap();
    let model = fit(&ds, &registry, &Hyperparameters::new(0.0, 1.0)).unwrap();
    let (mut worst_coef, mut worst_const) = (0.0f64, 0.0f64);
    for e in registry.entries() {
        let delta = dgp.optimal_delta(&e.mask).unwrap();
        let fitted = model.submodel(e.id);
        for (pos, j) in e.mask.observed_indices().into_iter().enumerate() {
            worst_coef = worst_coef.max((fitted[pos] - (dgp.theta[j] + delta[pos])).abs());
        }
        let c = dgp.optimal_intercept(&e.mask).unwrap();
        worst_const = worst_const.max((model.submodel_intercept(e.id) - c).abs());
    }
    check(
        worst_coef < 0.05 && worst_const < 0.05,
        format!("max coefficient deviation {worst_coef:.4}, max intercept deviation {worst_const:.4} (tol 0.05)"),
    )
}

fn sparsity_recovery() -> Outcome {
    let dgp = dgp_with_blocks(
        vec![0.0; 4],
        &[(&[0, 1], 0.7), (&[2, 3], 0.7)],
        vec![1.0, 1.5, -1.0, 2.0],
        &[("0100", 0.5), ("0001", -0.5)],
    );
    let patterns = [(m("0000"), 1.0), (m("0100"), 1.0), (m("0001"), 1.0)];
    let ds = sample_dgp(&dgp, &patterns, 50_000, 12).unwrap().dataset;
    let registry = registry_for(&ds, 0, FallbackPolicy::Error).unwrap();
    let model = fit(&ds, &registry, &Hyperparameters::new(0.0, 1000.0)).unwrap();
    let (mut worst_zero, mut largest_nonzero, mut zeros, mut nonzeros) = (0.0f64, 0.0f64, 0, 0);
    for e in registry.entries() {
        let delta = &model.patterns[e.id].delta;
        for (pos, j) in e.mask.observed_indices().into_iter().enumerate() {
            if dgp.sparsity_predicate(&e.mask, j).unwrap() {
                zeros += 1;
                worst_zero = worst_zero.max(delta[pos].abs());
            } else {
                nonzeros += 1;
                largest_nonzero = largest_nonzero.max(delta[pos].abs());
            }
        }
    }
    check(
        zeros > 0 && nonzeros > 0 && worst_zero < 1e-3 && largest_nonzero > 0.05,
        format!(
            "{zeros} predicted-zero entries, max |Δ| {worst_zero:.2e} (tol 1e-3); \
             {nonzeros} predicted-nonzero, max |Δ| {largest_nonzero:.3} (> 0.05)"
        ),
    )
}

fn minimum_l1_decomposition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut rows, mut y) = (Vec::new(), Vec::new());
    for i in 0..400 {
        let x0: f64 = rng.sample(StandardNormal);
        let x1: f64 = rng.sample(StandardNormal);
        let eps: f64 = rng.sample(StandardNormal);
        if i % 2 == 0 {
            rows.push(vec![Some(x0), Some(x1)]);
            y.push(1.0 * x0 + 0.5 * x1 + 0.3 * eps);
        } else {
            rows.push(vec![Some(x0), None]);
            y.push(1.8 * x0 + 0.3 * eps);
        }
    }
    let masks = rows
        .iter()
        .map(|r: &Vec<Option<f64>>| PatternMask::new(r.iter().map(Option::is_none).collect()))
        .collect();
    let ds = Dataset::new(numeric_schema(2), rows, y, masks).unwrap();
    let registry = registry_for(&ds, 0, FallbackPolicy::Error).unwrap();
    let hp = Hyperparameters {
        tol: 1e-12,
        max_iter: 100_000,
        ..Hyperparameters::new(0.0, 1.0)
    };
    let model = fit(&ds, &registry, &hp).unwrap();
    let fitted_l1: f64 = model
        .patterns
        .iter()
        .map(|p| p.delta.iter().map(|v| v.abs()).sum::<f64>())
        .sum();

    // brute force over θ with the per-pattern sums held fixed
    let sums: Vec<(Vec<usize>, Vec<f64>)> = registry
        .entries()
        .iter()
        .map(|e| (e.mask.observed_indices(), model.submodel(e.id)))
        .collect();
    let range = |j: usize| {
        let vals: Vec<f64> = sums
            .iter()
            .flat_map(|(obs, s)| obs.iter().zip(s).filter(|(k, _)| **k == j).map(|(_, v)| *v))
            .collect();
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min) - 0.05;
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 0.05;
        (lo, hi)
    };
    let step = 1e-3;
    let grid = |(lo, hi): (f64, f64)| -> Vec<f64> {
        let k = ((hi - lo) / step).ceil() as usize;
        (0..=k).map(|i| lo + i as f64 * step).collect()
    };
    let (g0, g1) = (grid(range(0)), grid(range(1)));
    let mut best = f64::INFINITY;
    for &t0 in &g0 {
        for &t1 in &g1 {
            let theta = [t0, t1];
            let total: f64 = sums
                .iter()
                .map(|(obs, s)| obs.iter().zip(s).map(|(&j, v)| (v - theta[j]).abs()).sum::<f64>())
                .sum();
            best = best.min(total);
        }
    }
    check(
        (fitted_l1 - best).abs() < 1e-3,
        format!("fitted Σ‖Δ‖₁ = {fitted_l1:.6}, grid minimum {best:.6} (tol 1e-3)"),
    )
}

/// Plain ridge by normal equations on dense columns with an unpenalized
/// intercept: minimizes (1/n)‖Xw + b − y‖² + ρ‖w‖².
fn ridge_oracle(x: &[Vec<f64>], y: &[f64], rho: f64) -> (Vec<f64>, f64) {
    let (n, p) = (x.len(), x[0].len());
    let mut a = DMatrix::<f64>::zeros(p + 1, p + 1);
    let mut rhs = DVector::<f64>::zeros(p + 1);
    for (row, &t) in x.iter().zip(y) {
        let f = DVector::from_iterator(p + 1, row.iter().copied().chain([1.0]));
        a += &f * f.transpose() / n as f64;
        rhs += &f * t / n as f64;
    }
    for j in 0..p {
        a[(j, j)] += rho;
    }
    let sol = a.lu().solve(&rhs).unwrap();
    (sol.rows(0, p).iter().copied().collect(), sol[p])
}

fn random_missing_ds(seed: u64, n: usize, d: usize, missing_col: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut rows, mut y) = (Vec::new(), Vec::new());
    for i in 0..n {
        let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let eps: f64 = rng.sample(StandardNormal);
        let gone = i % 3 == 0;
        y.push(x.iter().enumerate().map(|(j, v)| (j as f64 - 1.0) * v).sum::<f64>() + if gone { 0.7 } else { 0.0 } + eps);
        rows.push(
            x.iter()
                .enumerate()
                .map(|(j, &v)| (!(gone && j == missing_col)).then_some(v))
                .collect::<Vec<_>>(),
        );
    }
    let masks = rows
        .iter()
        .map(|r| PatternMask::new(r.iter().map(Option::is_none).collect()))
        .collect();
    Dataset::new(numeric_schema(d), rows, y, masks).unwrap()
}

fn extreme_case_equivalences() -> Outcome {
    let ds = random_missing_ds(14, 600, 4, 2);
    let tight = Hyperparameters {
        tol: 1e-14,
        max_iter: 200_000,
        ..Default::default()
    };

    // (a) λ → ∞ without pattern intercepts is zero-imputation ridge
    let rho = 0.02;
    let shared = fit_full_sharing(&ds, ds.n_rows() as f64 * rho, false, &tight).unwrap();
    let zero_filled: Vec<Vec<f64>> = (0..ds.n_rows()).map(|i| ds.zero_filled(i)).collect();
    let (w, b) = ridge_oracle(&zero_filled, ds.targets(), rho);
    let dev_a = shared
        .theta
        .iter()
        .zip(&w)
        .map(|(a, b)| (a - b).abs())
        .fold((shared.intercept - b).abs(), f64::max);

    // (b) γ → ∞, λ = 0 is one independent ridge per pattern
    let registry = registry_for(&ds, 0, FallbackPolicy::Error).unwrap();
    let hp = Hyperparameters {
        gamma: EFFECTIVELY_INFINITE,
        lambda: 0.0,
        main_norm: MainNorm::L2Squared,
        delta_ridge: rho,
        ..tight.clone()
    };
    let psm = fit(&ds, &registry, &hp).unwrap();
    let mut dev_b = 0.0f64;
    for e in registry.entries() {
        let obs = e.mask.observed_indices();
        let rows: Vec<usize> = (0..ds.n_rows()).filter(|&i| ds.masks()[i] == e.mask).collect();
        let x: Vec<Vec<f64>> = rows
            .iter()
            .map(|&i| obs.iter().map(|&j| ds.rows()[i][j].unwrap()).collect())
            .collect();
        let y: Vec<f64> = rows.iter().map(|&i| ds.targets()[i]).collect();
        let (w, b) = ridge_oracle(&x, &y, rho);
        for (a, o) in psm.submodel(e.id).iter().zip(&w) {
            dev_b = dev_b.max((a - o).abs());
        }
        dev_b = dev_b.max((psm.submodel_intercept(e.id) - b).abs());
    }
    let theta_max = psm.theta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    check(
        dev_a < 1e-4 && dev_b < 1e-3 && theta_max < 1e-3,
        format!(
            "(a) max deviation {dev_a:.2e} (tol 1e-4); (b) max deviation {dev_b:.2e} (tol 1e-3), max |θ| {theta_max:.1e}"
        ),
    )
}

/// Mean test R² per (method, fraction) over five split seeds; computed once
/// and shared by both halves of criterion 5.
fn setting_a_curve() -> &'static BTreeMap<(String, u8), f64> {
    static CURVE: OnceLock<BTreeMap<(String, u8), f64>> = OnceLock::new();
    CURVE.get_or_init(|| {
        // zero imputation means imputing the training mean after standardization
        let raw = sample(&SimConfig {
            setting: Setting::A,
            n: 2000,
            seed: 2022,
            ..Default::default()
        })
        .unwrap()
        .dataset;
        let ds = standardize(&raw).unwrap();
        let methods = [
            MethodConfig::new(Method::Spsm, Task::Regression),
            MethodConfig::new(Method::Psm, Task::Regression),
            MethodConfig::new(Method::ImputedZero, Task::Regression),
        ];
        let rows = learning_curve(&ds, &[0.2, 1.0], &[0, 1, 2, 3, 4], &methods, &Grid::default()).unwrap();
        assert!(rows.iter().all(|r| !r.failed()), "learning curve has failed cells");
        let mut sums: BTreeMap<(String, u8), (f64, usize)> = BTreeMap::new();
        for r in &rows {
            let e = sums.entry((r.method.clone(), (r.fraction * 10.0).round() as u8)).or_default();
            e.0 += r.value;
            e.1 += 1;
        }
        sums.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect()
    })
}

fn curve_mean(method: &str, tenths: u8) -> f64 {
    setting_a_curve()[&(method.to_string(), tenths)]
}

fn small_sample_ordering() -> Outcome {
    let (spsm, psm) = (curve_mean("spsm", 2), curve_mean("psm", 2));
    check(
        spsm >= psm,
        format!("fraction 0.2, mean R² over 5 seeds: SPSM {spsm:.4} vs PSM {psm:.4} (need SPSM ≥ PSM)"),
    )
}

fn full_sample_plateau() -> Outcome {
    let (spsm, psm, zero) = (curve_mean("spsm", 10), curve_mean("psm", 10), curve_mean("imputed_zero", 10));
    check(
        spsm > zero && psm > zero,
        format!("fraction 1.0, mean R² over 5 seeds: SPSM {spsm:.4}, PSM {psm:.4}, zero-imputation ridge {zero:.4} (need both above ridge)"),
    )
}

fn random_instance(seed: u64, task: Task) -> (Dataset, PatternRegistry, Hyperparameters, SpsmParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(10..40);
    let d = rng.random_range(1..5);
    let rows: Vec<Vec<Option<f64>>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| {
                    let v: f64 = rng.sample(StandardNormal);
                    (!rng.random_bool(0.3)).then_some(v)
                })
                .collect()
        })
        .collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|r| {
            let s = r.iter().flatten().sum::<f64>() + rng.sample::<f64, _>(StandardNormal);
            match task {
                Task::Regression => s,
                Task::Classification => (s > 0.0) as u8 as f64,
            }
        })
        .collect();
    let masks = rows
        .iter()
        .map(|r| PatternMask::new(r.iter().map(Option::is_none).collect()))
        .collect();
    let ds = Dataset::new(numeric_schema(d), rows, y, masks).unwrap();
    let registry = registry_for(&ds, 0, FallbackPolicy::Error).unwrap();
    let hp = Hyperparameters {
        gamma: rng.random_range(0.0..5.0),
        lambda: rng.random_range(0.0..5.0),
        main_norm: if rng.random_bool(0.5) { MainNorm::L1 } else { MainNorm::L2Squared },
        task,
        ..Default::default()
    };
    let mut normal = || rng.sample::<f64, _>(StandardNormal);
    let params = SpsmParams {
        theta: (0..d).map(|_| normal()).collect(),
        intercept: normal(),
        deltas: registry
            .entries()
            .iter()
            .map(|e| (0..e.mask.observed_indices().len()).map(|_| normal()).collect())
            .collect(),
        alphas: registry.entries().iter().map(|_| normal()).collect(),
    };
    (ds, registry, hp, params)
}

fn gradient_correctness() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for seed in 0..20 {
        for task in [Task::Regression, Task::Classification] {
            let (ds, registry, mut hp, params) = random_instance(100 + seed, task);
            // the smooth part: ℓ1 terms off, squared-ℓ2 main penalty on
            hp.lambda = 0.0;
            hp.main_norm = MainNorm::L2Squared;
            let problem = SpsmProblem::new(&ds, &registry, &hp).unwrap();
            let x = problem.pack(&params);
            let (_, g) = problem.smooth_gradient_flat(&x);
            let h = 1e-5;
            let mut err = 0.0;
            for k in 0..x.len() {
                let (mut up, mut down) = (x.clone(), x.clone());
                up[k] += h;
                down[k] -= h;
                let fd = (problem.smooth_value_flat(&up) - problem.smooth_value_flat(&down)) / (2.0 * h);
                err += (fd - g[k]).powi(2);
            }
            let scale = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            worst = worst.max(err.sqrt() / scale);
            count += 1;
        }
    }
    check(
        worst < 1e-5,
        format!("{count} instances, max relative error {worst:.2e} (tol 1e-5)"),
    )
}

fn convexity_and_monotonicity() -> Outcome {
    let mut worst_gap = f64::NEG_INFINITY;
    let mut increases = 0;
    for seed in 0..100 {
        let task = if seed % 2 == 0 { Task::Regression } else { Task::Classification };
        let (ds, registry, hp, p) = random_instance(1000 + seed, task);
        let problem = SpsmProblem::new(&ds, &registry, &hp).unwrap();
        let xp = problem.pack(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + seed);
        let xq: Vec<f64> = (0..xp.len()).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let t = rng.random_range(0.01..0.99);
        let mid: Vec<f64> = xp.iter().zip(&xq).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let gap = problem.objective_flat(&mid)
            - (t * problem.objective_flat(&xp) + (1.0 - t) * problem.objective_flat(&xq));
        worst_gap = worst_gap.max(gap);

        let report = minimize(&problem, problem.zeros(), &ProxOptions::default()).unwrap();
        increases += report.trace.windows(2).filter(|w| w[1] > w[0]).count();
    }
    check(
        worst_gap <= 1e-9 && increases == 0,
        format!("100 instances: max convexity gap {worst_gap:.2e} (tol 1e-9), {increases} objective increases"),
    )
}

fn metric_values() -> Outcome {
    let (lo, hi) = wilson_ci(8, 10, 0.05);
    let tie = auc(&[0.3; 6], &[0.0, 1.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
    let (hlo, hhi) = hanley_mcneil_ci(1.0, 25, 30, 0.05);
    check(
        (lo - 0.490).abs() <= 0.005 && (hi - 0.943).abs() <= 0.005 && tie == 0.5 && hlo == 1.0 && hhi == 1.0,
        format!("Wilson 8/10 = ({lo:.4}, {hi:.4}); AUC on constant scores {tie}; Hanley-McNeil at A=1 ({hlo}, {hhi})"),
    )
}

fn report_shape() -> Outcome {
    let ds = sample(&SimConfig {
        d: 8,
        k: 2,
        setting: Setting::A,
        n: 600,
        seed: 15,
        ..Default::default()
    })
    .unwrap()
    .dataset;
    let (train, _, test) = split(&ds, 15);
    let cell = Cell { gamma: 1.0, lambda: 10.0, ridge: 0.01 };
    let solver = Hyperparameters::default();
    let models = [
        spsm_core::eval::fit_method(&train, &MethodConfig::new(Method::Spsm, Task::Regression), cell).unwrap(),
        spsm_core::eval::fit_method(&train, &MethodConfig::new(Method::Psm, Task::Regression), cell).unwrap(),
        FittedModel::FullSharing(fit_full_sharing(&train, 1.0, true, &solver).unwrap()),
        FittedModel::ImputedRidge(fit_imputed(&train, Imputer::Zero, 0.01, Task::Regression, &solver).unwrap()),
    ];
    let mut problems = Vec::new();
    let mut labels = BTreeMap::new();
    for model in &models {
        let r = evaluate(model, &test, 0).unwrap();
        let label = r.nonzero_label();
        let parts: Vec<&str> = label.split(" + ").collect();
        if parts.len() != 2 || parts.iter().any(|p| p.parse::<usize>().is_err()) {
            problems.push(format!("{}: label {label:?}", r.method));
        }
        for line in r.csv_lines() {
            if line.split(',').count() != 7 {
                problems.push(format!("{}: csv line {line:?}", r.method));
            }
        }
        for v in [r.r2, r.mse].into_iter().flatten() {
            if !(v.lo <= v.value && v.value <= v.hi) {
                problems.push(format!("{}: interval {v:?}", r.method));
            }
        }
        match r.method.as_str() {
            "psm" if r.shared_nonzero != 0 => problems.push("psm has shared coefficients".into()),
            "full_sharing" if r.specific_nonzero != 0 => problems.push("full sharing has specific coefficients".into()),
            _ => {}
        }
        labels.insert(r.method.clone(), label);
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            format!("k + l labels {labels:?}; every metric has a containing CI")
        } else {
            problems.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("1 oracle consistency", oracle_consistency),
        ("2 sparsity recovery", sparsity_recovery),
        ("3 minimum-l1 decomposition", minimum_l1_decomposition),
        ("4 extreme-case equivalences", extreme_case_equivalences),
        ("5a setting A, SPSM vs PSM at fraction 0.2", small_sample_ordering),
        ("5b setting A, pattern models vs ridge at fraction 1.0", full_sample_plateau),
        ("6 gradient correctness", gradient_correctness),
        ("7 convexity and monotonicity", convexity_and_monotonicity),
        ("8 metric values", metric_values),
        ("9 report shape", report_shape),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  criterion {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failures += 1;
                println!("FAIL  criterion {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
