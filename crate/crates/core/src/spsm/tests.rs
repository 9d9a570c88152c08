use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::*;
use crate::data::numeric_schema;
use crate::prox::{minimize, ProxOptions};

fn dataset(rows: Vec<Vec<Option<f64>>>, y: Vec<f64>) -> Dataset {
    let d = rows[0].len();
    let masks = rows
        .iter()
        .map(|r| PatternMask::new(r.iter().map(Option::is_none).collect()))
        .collect();
    Dataset::new(numeric_schema(d), rows, y, masks).unwrap()
}

/// Random instance with `d` features, cells missing with probability 0.3.
fn random_instance(seed: u64, n: usize, d: usize, task: Task) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
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
    let y = (0..n)
        .map(|i| {
            let s: f64 = rows[i].iter().flatten().sum::<f64>() + rng.sample::<f64, _>(StandardNormal);
            match task {
                Task::Regression => s,
                Task::Classification => (s > 0.0) as u8 as f64,
            }
        })
        .collect();
    dataset(rows, y)
}

fn random_params(rng: &mut ChaCha8Rng, registry: &PatternRegistry, ds: &Dataset) -> SpsmParams {
    let mut normal = || rng.sample::<f64, _>(StandardNormal);
    SpsmParams {
        theta: (0..ds.n_encoded()).map(|_| normal()).collect(),
        intercept: normal(),
        deltas: registry
            .entries()
            .iter()
            .map(|e| {
                (0..ds.schema().observed_encoded(&e.mask).len())
                    .map(|_| normal())
                    .collect()
            })
            .collect(),
        alphas: registry.entries().iter().map(|_| normal()).collect(),
    }
}

fn one_feature_model(theta: f64, delta: f64, intercept: f64, alpha: f64, task: Task) -> SpsmModel {
    let registry =
        PatternRegistry::build(&[(PatternMask::complete(1), 1)], 0, FallbackPolicy::Error).unwrap();
    let hp = Hyperparameters::default().with_task(task);
    let params = SpsmParams {
        theta: vec![theta],
        intercept,
        deltas: vec![vec![delta]],
        alphas: vec![alpha],
    };
    let diagnostics = SolverDiagnostics {
        iterations: 0,
        converged: true,
        initial_objective: 0.0,
        final_objective: 0.0,
    };
    SpsmModel::from_params(numeric_schema(1), registry, hp, params, diagnostics)
}

#[test]
fn predict_arithmetic() {
    let model = one_feature_model(1.0, 0.5, 0.1, -0.05, Task::Regression);
    let p = model.predict(&[Some(2.0)], &PatternMask::complete(1)).unwrap();
    assert!((p.value - 3.05).abs() < 1e-12);
    assert_eq!(p.resolution, Resolution::Pattern { id: 0, exact: true });
}

#[test]
fn classification_link_at_zero_score() {
    let model = one_feature_model(1.0, 0.0, 0.0, 0.0, Task::Classification);
    let p = model.predict(&[Some(0.0)], &PatternMask::complete(1)).unwrap();
    assert_eq!(p.value, 0.5);
}

#[test]
fn zero_specialization_is_zero_imputation() {
    let ds = random_instance(1, 60, 4, Task::Regression);
    let registry = registry_for(&ds, 0, FallbackPolicy::Error).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut params = random_params(&mut rng, &registry, &ds);
    params.deltas.iter_mut().for_each(|d| d.fill(0.0));
    params.alphas.fill(0.0);
    let model = SpsmModel::from_params(
        ds.schema().clone(),
        registry,
        Hyperparameters::default(),
        params.clone(),
        SolverDiagnostics {
            iterations: 0,
            converged: true,
            initial_objective: 0.0,
            final_objective: 0.0,
        },
    );
    for i in 0..ds.n_rows() {
        let zero_imputed: f64 = ds
            .zero_filled(i)
            .iter()
            .zip(&params.theta)
            .map(|(x, t)| x * t)
            .sum::<f64>()
            + params.intercept;
        let got = model.predict(&ds.rows()[i], &ds.masks()[i]).unwrap().value;
        assert!((got - zero_imputed).abs() < 1e-12);
    }
}

#[test]
fn main_model_fallback_zero_imputes() {
    let ds = dataset(vec![vec![Some(1.0), None], vec![Some(2.0), None]], vec![1.0, 2.0]);
    let registry = registry_for(&ds, 0, FallbackPolicy::MainModelZeroImpute).unwrap();
    let model = fit(&ds, &registry, &Hyperparameters::new(0.0, 1.0)).unwrap();
    let mask: PatternMask = "10".parse().unwrap();
    let p = model.predict(&[None, Some(3.0)], &mask).unwrap();
    assert_eq!(p.resolution, Resolution::MainModel);
    let expected = model.theta[1] * 3.0 + model.intercept;
    assert!((p.value - expected).abs() < 1e-12);

    let strict = SpsmModel {
        registry: model.registry.clone().with_fallback(FallbackPolicy::Error),
        ..model
    };
    assert!(matches!(
        strict.predict(&[None, Some(3.0)], &mask),
        Err(SpsmError::Resolution { .. })
    ));
}

fn single_point(task: Task, y: f64, gamma: f64, main_norm: MainNorm) -> (Dataset, PatternRegistry, Hyperparameters) {
    let ds = dataset(vec![vec![Some(1.0)]], vec![y]);
    let registry = registry_for(&ds, 0, FallbackPolicy::Error).unwrap();
    let hp = Hyperparameters {
        gamma,
        lambda: 0.0,
        main_norm,
        task,
        ..Default::default()
    };
    (ds, registry, hp)
}

#[test]
fn objective_examples() {
    let params = |theta: f64| SpsmParams {
        theta: vec![theta],
        intercept: 0.0,
        deltas: vec![vec![0.0]],
        alphas: vec![0.0],
    };
    let (ds, reg, hp) = single_point(Task::Regression, 0.0, 0.0, MainNorm::L1);
    assert_eq!(objective(&params(1.0), &ds, &reg, &hp).unwrap(), 1.0);
    let (ds, reg, hp) = single_point(Task::Regression, 0.0, 1.0, MainNorm::L1);
    assert_eq!(objective(&params(1.0), &ds, &reg, &hp).unwrap(), 2.0);
    let (ds, reg, hp) = single_point(Task::Classification, 1.0, 0.0, MainNorm::L1);
    let v = objective(&params(0.0), &ds, &reg, &hp).unwrap();
    assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
}

#[test]
fn objective_rejects_misshapen_params() {
    let (ds, reg, hp) = single_point(Task::Regression, 0.0, 0.0, MainNorm::L1);
    let bad = SpsmParams {
        theta: vec![1.0, 2.0],
        intercept: 0.0,
        deltas: vec![vec![0.0]],
        alphas: vec![0.0],
    };
    assert!(matches!(objective(&bad, &ds, &reg, &hp), Err(SpsmError::Validation(_))));
}

#[test]
fn gradient_vanishes_at_least_squares_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (n, d) = (50, 3);
    let x = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = DVector::from_fn(n, |i, _| x[(i, 0)] - 2.0 * x[(i, 2)] + 0.5 + rng.sample::<f64, _>(StandardNormal));
    let design = DMatrix::from_fn(n, d + 1, |i, j| if j < d { x[(i, j)] } else { 1.0 });
    let beta = (design.transpose() * &design)
        .cholesky()
        .unwrap()
        .solve(&(design.transpose() * &y));
    let ds = Dataset::from_dense(
        (0..n).map(|i| (0..d).map(|j| x[(i, j)]).collect()).collect(),
        y.iter().copied().collect(),
    )
    .unwrap();
    let registry = registry_for(&ds, 0, FallbackPolicy::Error).unwrap();
    let hp = Hyperparameters::new(0.0, 0.0);
    let params = SpsmParams {
        theta: beta.rows(0, d).iter().copied().collect(),
        intercept: beta[d],
        deltas: vec![vec![0.0; d]],
        alphas: vec![0.0],
    };
    let g = smooth_gradient(&params, &ds, &registry, &hp).unwrap();
    let worst = g
        .theta
        .iter()
        .chain(&g.deltas[0])
        .chain([&g.intercept, &g.alphas[0]])
        .fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst < 1e-10, "{worst}");
}

/// Central differences of the objective with every penalty smooth.
fn finite_difference_check(seed: u64, task: Task) {
    let ds = random_instance(seed, 30, 3, task);
    let registry = registry_for(&ds, 0, FallbackPolicy::Error).unwrap();
    let hp = Hyperparameters {
        gamma: 0.7,
        lambda: 0.0,
        main_norm: MainNorm::L2Squared,
        task,
        delta_ridge: 0.3,
        ..Default::default()
    };
    let problem = SpsmProblem::new(&ds, &registry, &hp).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
    let x = problem.pack(&random_params(&mut rng, &registry, &ds));
    let (_, g) = problem.smooth_gradient_flat(&x);
    let h = 1e-5;
    let fd: Vec<f64> = (0..x.len())
        .map(|k| {
            let mut up = x.clone();
            let mut down = x.clone();
            up[k] += h;
            down[k] -= h;
            (problem.objective_flat(&up) - problem.objective_flat(&down)) / (2.0 * h)
        })
        .collect();
    let err: f64 = fd.iter().zip(&g).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(err / scale < 1e-5, "seed {seed} {task:?}: relative error {}", err / scale);
}

#[test]
fn gradient_matches_finite_differences() {
    for seed in 0..5 {
        finite_difference_check(seed, Task::Regression);
        finite_difference_check(seed, Task::Classification);
    }
}

#[test]
fn delta_gradient_uses_only_its_pattern() {
    let ds = random_instance(4, 40, 3, Task::Regression);
    let registry = registry_for(&ds, 0, FallbackPolicy::Error).unwrap();
    let hp = Hyperparameters::new(0.5, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = random_params(&mut rng, &registry, &ds);
    let before = smooth_gradient(&params, &ds, &registry, &hp).unwrap();
    let target = registry.entry(0).mask.clone();
    let shuffled: Vec<f64> = ds
        .targets()
        .iter()
        .zip(ds.masks())
        .map(|(&y, m)| if *m == target { y } else { y + 10.0 })
        .collect();
    let after = smooth_gradient(&params, &ds.with_targets(shuffled).unwrap(), &registry, &hp).unwrap();
    assert_eq!(before.deltas[0], after.deltas[0]);
    assert_eq!(before.alphas[0], after.alphas[0]);
    assert_ne!(before.theta, after.theta);
}

#[test]
fn recovers_noiseless_line() {
    let ds = Dataset::from_dense(
        (0..20).map(|i| vec![i as f64 / 10.0 - 1.0]).collect(),
        (0..20).map(|i| 2.0 * (i as f64 / 10.0 - 1.0)).collect(),
    )
    .unwrap();
    let registry = registry_for(&ds, 0, FallbackPolicy::Error).unwrap();
    let model = fit(&ds, &registry, &Hyperparameters::new(0.0, 0.0)).unwrap();
    assert!((model.submodel(0)[0] - 2.0).abs() < 1e-4, "{:?}", model.submodel(0));
    assert!(model.diagnostics.converged);
}

#[test]
fn zero_targets_give_zero_parameters() {
    let ds = random_instance(6, 30, 3, Task::Regression);
    let ds = ds.with_targets(vec![0.0; ds.n_rows()]).unwrap();
    let registry = registry_for(&ds, 0, FallbackPolicy::Error).unwrap();
    let model = fit(&ds, &registry, &Hyperparameters::new(1.0, 1.0)).unwrap();
    assert!(model.theta.iter().all(|v| *v == 0.0));
    assert_eq!(model.intercept, 0.0);
    assert!(model.patterns.iter().all(|p| p.alpha == 0.0 && p.delta.iter().all(|v| *v == 0.0)));
}

#[test]
fn unspecialized_patterns_have_no_delta_or_alpha() {
    let ds = random_instance(7, 80, 3, Task::Regression);
    let registry = registry_for(&ds, 15, FallbackPolicy::Error).unwrap();
    assert!(registry.entries().iter().any(|e| !e.specialized));
    let model = fit(&ds, &registry, &Hyperparameters::new(0.1, 0.1)).unwrap();
    for (e, p) in registry.entries().iter().zip(&model.patterns) {
        if !e.specialized {
            assert!(p.delta.iter().all(|v| *v == 0.0) && p.alpha == 0.0);
        }
    }
}

#[test]
fn large_lambda_zeroes_every_delta() {
    let ds = random_instance(8, 80, 3, Task::Regression);
    let registry = registry_for(&ds, 0, FallbackPolicy::Error).unwrap();
    let model = fit(&ds, &registry, &Hyperparameters::new(1.0, EFFECTIVELY_INFINITE)).unwrap();
    assert_eq!(model.nonzero_counts().1, 0);
}

#[test]
fn classification_targets_must_be_binary() {
    let ds = random_instance(9, 10, 2, Task::Regression);
    let registry = registry_for(&ds, 0, FallbackPolicy::Error).unwrap();
    let hp = Hyperparameters::new(0.0, 1.0).with_task(Task::Classification);
    assert!(matches!(fit(&ds, &registry, &hp), Err(SpsmError::Validation(_))));
}

#[test]
fn overflowing_objective_is_a_fit_error() {
    let ds = Dataset::from_dense(vec![vec![1.0], vec![2.0]], vec![1e200, -1e200]).unwrap();
    let registry = registry_for(&ds, 0, FallbackPolicy::Error).unwrap();
    assert!(matches!(
        fit(&ds, &registry, &Hyperparameters::new(0.0, 1.0)),
        Err(SpsmError::Fit { .. })
    ));
}

#[test]
fn hyperparameter_validation() {
    let bad = [
        Hyperparameters::new(-1.0, 1.0),
        Hyperparameters::new(0.0, f64::NAN),
        Hyperparameters {
            tol: 0.0,
            ..Default::default()
        },
    ];
    for hp in bad {
        assert!(matches!(hp.validate(), Err(SpsmError::Config(_))));
    }
    let mut hp = Hyperparameters::new(0.0, 2.0);
    hp.lambda_per_pattern.insert(3, 7.0);
    assert_eq!((hp.lambda_for(3), hp.lambda_for(0)), (7.0, 2.0));
}

fn arb_case() -> impl Strategy<Value = (u64, bool, bool, f64, f64, f64)> {
    (
        0u64..5000,
        any::<bool>(),
        any::<bool>(),
        0.0f64..5.0,
        0.0f64..5.0,
        0.01f64..0.99,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn objective_is_convex((seed, l1, cls, gamma, lambda, t) in arb_case()) {
        let task = if cls { Task::Classification } else { Task::Regression };
        let ds = random_instance(seed, 25, 3, task);
        let registry = registry_for(&ds, 0, FallbackPolicy::Error).unwrap();
        let hp = Hyperparameters {
            gamma,
            lambda,
            main_norm: if l1 { MainNorm::L1 } else { MainNorm::L2Squared },
            task,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let p = random_params(&mut rng, &registry, &ds);
        let q = random_params(&mut rng, &registry, &ds);
        let problem = SpsmProblem::new(&ds, &registry, &hp).unwrap();
        let (xp, xq) = (problem.pack(&p), problem.pack(&q));
        let mid: Vec<f64> = xp.iter().zip(&xq).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let lhs = problem.objective_flat(&mid);
        let rhs = t * problem.objective_flat(&xp) + (1.0 - t) * problem.objective_flat(&xq);
        prop_assert!(lhs <= rhs + 1e-9, "{lhs} > {rhs}");
    }

    #[test]
    fn accepted_iterates_never_increase((seed, l1, cls, gamma, lambda, _t) in arb_case()) {
        let task = if cls { Task::Classification } else { Task::Regression };
        let ds = random_instance(seed, 40, 3, task);
        let registry = registry_for(&ds, 0, FallbackPolicy::Error).unwrap();
        let hp = Hyperparameters {
            gamma,
            lambda,
            main_norm: if l1 { MainNorm::L1 } else { MainNorm::L2Squared },
            task,
            ..Default::default()
        };
        let problem = SpsmProblem::new(&ds, &registry, &hp).unwrap();
        let report = minimize(&problem, problem.zeros(), &ProxOptions::default()).unwrap();
        for w in report.trace.windows(2) {
            prop_assert!(w[1] <= w[0], "{} -> {}", w[0], w[1]);
        }
        let model = fit(&ds, &registry, &hp).unwrap();
        prop_assert!(model.diagnostics.final_objective <= model.diagnostics.initial_objective);
    }
}
