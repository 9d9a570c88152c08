use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde_json::Value;

use spsm_core::data::{extract_patterns, ingest_csv, ingest_with_schema, read_features, standardize, write_csv};
use spsm_core::eval::{
    evaluate as score, fit_method, grid_search, learning_curve, split_indices, write_curve_csv,
    Cell, EvalReport, Grid, Method, MethodConfig,
};
use spsm_core::synth::{sample, SimConfig, SimMetadata};
use spsm_core::{Dataset, FallbackPolicy, FittedModel, Hyperparameters, MainNorm, ModelFile, SpsmError, Task};

use crate::args::{
    CurveArgs, DataArgs, EvaluateArgs, FitArgs, GridArgs, PredictArgs, SimulateArgs, TrainArgs,
};
use crate::config;
use crate::failure::{self, Failure};

pub fn require<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T, Failure> {
    value
        .as_ref()
        .ok_or_else(|| Failure::input(format!("missing required option --{flag}")))
}

/// Parse a snake_case name into one of the core's serde enums.
fn parse_name<T: DeserializeOwned>(what: &str, name: &str) -> Result<T, Failure> {
    serde_json::from_value(Value::String(name.to_string()))
        .map_err(|_| Failure::input(format!("unknown {what} {name:?}")))
}

fn parse_fallback(name: &str) -> Result<FallbackPolicy, Failure> {
    match name {
        "main_model" => Ok(FallbackPolicy::MainModelZeroImpute),
        other => parse_name("fallback policy", other),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| failure::io(path, e))
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn finish(mut w: impl Write, path: Option<&Path>) -> Result<(), Failure> {
    w.flush().map_err(|e| match path {
        Some(p) => failure::io(p, e),
        None => Failure::internal(format!("cannot write to stdout: {e}")),
    })
}

fn fill_data_defaults(a: &mut DataArgs) {
    a.target.get_or_insert_with(|| "y".into());
    a.categorical.get_or_insert_with(Vec::new);
    a.task.get_or_insert_with(|| "regression".into());
}

fn fill_fit_defaults(a: &mut FitArgs) {
    let hp = Hyperparameters::default();
    a.main_norm.get_or_insert_with(|| "l2_squared".into());
    a.min_pattern_n.get_or_insert(0);
    a.fallback.get_or_insert_with(|| "main_model".into());
    a.tol.get_or_insert(hp.tol);
    a.max_iter.get_or_insert(hp.max_iter);
}

/// Read and standardize a training file.
fn load_training(a: &DataArgs) -> Result<(Dataset, Task), Failure> {
    let path = require(&a.data, "data")?;
    let task: Task = parse_name("task", a.task.as_deref().unwrap_or("regression"))?;
    let categorical: Vec<&str> = a.categorical.iter().flatten().map(String::as_str).collect();
    let raw = ingest_csv(path, a.target.as_deref().unwrap_or("y"), &categorical)?;
    log::info!("read {} rows, {} encoded features from {}", raw.n_rows(), raw.n_encoded(), path.display());
    Ok((standardize(&raw)?, task))
}

fn method_config(method: Method, task: Task, a: &FitArgs) -> Result<MethodConfig, Failure> {
    let mut cfg = MethodConfig::new(method, task);
    cfg.base.main_norm = parse_name::<MainNorm>("main norm", a.main_norm.as_deref().unwrap_or("l2_squared"))?;
    cfg.base.tol = a.tol.unwrap_or(cfg.base.tol);
    cfg.base.max_iter = a.max_iter.unwrap_or(cfg.base.max_iter);
    cfg.min_pattern_n = a.min_pattern_n.unwrap_or(0);
    cfg.cc_threshold = a.cc_threshold;
    if let Some(f) = &a.fallback {
        cfg.fallback = parse_fallback(f)?;
    }
    Ok(cfg)
}

fn grid_from(a: &GridArgs) -> Grid {
    let d = Grid::default();
    Grid {
        gammas: a.gammas.clone().unwrap_or(d.gammas),
        lambdas: a.lambdas.clone().unwrap_or(d.lambdas),
        ridge: a.ridges.clone().unwrap_or(d.ridge),
    }
}

fn solver_summary(model: &FittedModel) -> String {
    match model.as_spsm() {
        Some(m) => {
            let d = &m.diagnostics;
            format!(
                "{} iterations, objective {:.6} -> {:.6}{}",
                d.iterations,
                d.initial_objective,
                d.final_objective,
                if d.converged { "" } else { " (not converged)" }
            )
        }
        None => match model {
            FittedModel::ImputedRidge(_) => "closed form".into(),
            _ => "proximal gradient".into(),
        },
    }
}

pub fn train(mut a: TrainArgs) -> Result<(), Failure> {
    fill_data_defaults(&mut a.input);
    fill_fit_defaults(&mut a.fit);
    let out = require(&a.out, "out")?.clone();
    let method: Method = a.method.get_or_insert_with(|| "spsm".into()).parse()?;
    let search = *a.search.get_or_insert(false);
    let seed = *a.seed.get_or_insert(0);
    let (ds, task) = load_training(&a.input)?;
    let cfg = method_config(method, task, &a.fit)?;

    let cell = if search {
        let grid = grid_from(&a.grid);
        let (mut fit_idx, valid_idx, test_idx) = split_indices(ds.n_rows(), seed);
        fit_idx.extend(test_idx);
        let outcome = grid_search(&ds.subset(&fit_idx), &ds.subset(&valid_idx), &grid, &cfg)?;
        for c in &outcome.cells {
            match &c.score {
                Ok(s) => log::info!("gamma={} lambda={} ridge={}: {s}", c.cell.gamma, c.cell.lambda, c.cell.ridge),
                Err(e) => log::warn!("gamma={} lambda={} ridge={}: {e}", c.cell.gamma, c.cell.lambda, c.cell.ridge),
            }
        }
        println!(
            "grid search over {} cells on {} validation rows selected gamma={} lambda={} ridge={}",
            outcome.cells.len(),
            valid_idx.len(),
            outcome.best.gamma,
            outcome.best.lambda,
            outcome.best.ridge
        );
        outcome.best
    } else {
        Cell {
            gamma: a.gamma.unwrap_or(0.0),
            lambda: a.lambda.unwrap_or(1.0),
            ridge: a.ridge.unwrap_or(0.01),
        }
    };
    a.gamma = Some(cell.gamma);
    a.lambda = Some(cell.lambda);
    a.ridge = Some(cell.ridge);

    let model = fit_method(&ds, &cfg, cell)?;
    let (k, l) = model.nonzero_counts();
    println!("method     {}", model.method_name());
    println!("rows       {}", ds.n_rows());
    if let Some(m) = model.as_spsm() {
        let specialized = m.registry.entries().iter().filter(|e| e.specialized).count();
        println!("patterns   {} ({specialized} specialized)", m.registry.len());
    }
    println!("solver     {}", solver_summary(&model));
    println!("nonzero    {k} + {l} (shared + pattern-specific)");
    ModelFile::new(model).save(&out)?;
    config::echo("train", &a, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}

pub fn predict(a: PredictArgs) -> Result<(), Failure> {
    let model_path = require(&a.model, "model")?;
    let data = require(&a.data, "data")?;
    let mut model = ModelFile::load(model_path)?.model;
    if let Some(name) = &a.fallback {
        let policy = parse_fallback(name)?;
        if let FittedModel::Spsm(m) | FittedModel::Psm(m) | FittedModel::FullSharing(m) = &mut model {
            m.registry = m.registry.clone().with_fallback(policy);
        }
    }
    let features = read_features(data, model.schema())?;
    let mut w = output(a.out.as_ref())?;
    let write_err = |e: io::Error| Failure::internal(format!("cannot write predictions: {e}"));
    writeln!(w, "prediction,pattern_id,fallback").map_err(write_err)?;
    for (i, (x, mask)) in features.rows.iter().zip(&features.masks).enumerate() {
        let p = model.predict_row(x, mask).map_err(|e| {
            let mut f = Failure::from(e);
            f.message = format!("row {}: {}", i + 1, f.message);
            f
        })?;
        let id = p.pattern_id().map(|id| id.to_string()).unwrap_or_default();
        writeln!(w, "{},{id},{}", p.value, p.is_fallback() as u8).map_err(write_err)?;
    }
    finish(w, a.out.as_deref())?;
    if let Some(out) = &a.out {
        config::echo("predict", &a, out)?;
        eprintln!("wrote {} predictions to {}", features.rows.len(), out.display());
    }
    Ok(())
}

pub fn evaluate(mut a: EvaluateArgs) -> Result<(), Failure> {
    let models = require(&a.models, "model")?;
    if models.is_empty() {
        return Err(Failure::input("missing required option --model"));
    }
    let data = require(&a.data, "data")?;
    let seed = *a.seed.get_or_insert(0);
    let mut reports: Vec<(String, EvalReport)> = Vec::new();
    for path in models {
        let model = ModelFile::load(path)?.model;
        let test = ingest_with_schema(data, model.schema())?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        reports.push((name, score(&model, &test, seed)?));
    }

    println!(
        "{:<20} {:<16} {:>6}  {:<9} {:<24} nonzero",
        "model", "method", "n", "metric", "value (95% CI)"
    );
    for (name, r) in &reports {
        for (metric, v) in [("r2", r.r2), ("mse", r.mse), ("accuracy", r.accuracy), ("auc", r.auc)] {
            if let Some(v) = v {
                println!(
                    "{:<20} {:<16} {:>6}  {:<9} {:<24} {}",
                    name,
                    r.method,
                    r.n,
                    metric,
                    v.to_string(),
                    r.nonzero_label()
                );
            }
        }
    }
    if let Some(out) = &a.out {
        let mut w = create(out)?;
        let write_err = |e: io::Error| failure::io(out, e);
        writeln!(w, "model,{}", EvalReport::csv_header()).map_err(write_err)?;
        for (name, r) in &reports {
            for line in r.csv_lines() {
                writeln!(w, "{name},{line}").map_err(write_err)?;
            }
        }
        finish(w, Some(out))?;
        config::echo("evaluate", &a, out)?;
    }
    Ok(())
}

pub fn simulate(mut a: SimulateArgs) -> Result<(), Failure> {
    let out = require(&a.out, "out")?.clone();
    let d = SimConfig::default();
    let cfg = SimConfig {
        d: *a.d.get_or_insert(d.d),
        k: *a.k.get_or_insert(d.k),
        c: *a.c.get_or_insert(d.c),
        setting: a.setting.get_or_insert_with(|| "A".into()).parse()?,
        mcar_p: *a.mcar_p.get_or_insert(d.mcar_p),
        threshold: *a.threshold.get_or_insert(d.threshold),
        n: *a.n.get_or_insert(d.n),
        seed: *a.seed.get_or_insert(d.seed),
    };
    let sim = sample(&cfg)?;
    let mut w = create(&out)?;
    write_csv(&sim.dataset, &mut w)?;
    finish(w, Some(&out))?;

    let meta_path = config::sidecar(&out, "meta.json");
    let meta = serde_json::to_string_pretty(&SimMetadata::new(&cfg, &sim.theta)).map_err(SpsmError::from)?;
    std::fs::write(&meta_path, meta + "\n").map_err(|e| failure::io(&meta_path, e))?;
    config::echo("simulate", &a, &out)?;

    let cells = (cfg.n * cfg.d) as f64;
    let missing: usize = sim.masks().iter().map(|m| m.n_missing()).sum();
    println!(
        "wrote {} rows, {} features, {} distinct patterns, {:.1}% cells missing to {}",
        cfg.n,
        cfg.d,
        extract_patterns(&sim.dataset).len(),
        100.0 * missing as f64 / cells,
        out.display()
    );
    println!("ground truth in {}", meta_path.display());
    Ok(())
}

pub fn curve(mut a: CurveArgs) -> Result<(), Failure> {
    fill_data_defaults(&mut a.input);
    fill_fit_defaults(&mut a.fit);
    let out = require(&a.out, "out")?.clone();
    let methods: Vec<Method> = a
        .methods
        .get_or_insert_with(|| ["spsm", "psm", "imputed_zero", "imputed_mean"].map(String::from).to_vec())
        .iter()
        .map(|m| m.parse())
        .collect::<Result<_, SpsmError>>()?;
    let fractions = a
        .fractions
        .get_or_insert_with(|| vec![0.2, 0.4, 0.6, 0.8, 1.0])
        .clone();
    let first = *a.first_seed.get_or_insert(0);
    let seeds: Vec<u64> = (first..first + *a.seeds.get_or_insert(5)).collect();
    let grid = grid_from(&a.grid);
    a.grid.gammas = Some(grid.gammas.clone());
    a.grid.lambdas = Some(grid.lambdas.clone());
    a.grid.ridges = Some(grid.ridge.clone());

    let (ds, task) = load_training(&a.input)?;
    let configs = methods
        .iter()
        .map(|&m| method_config(m, task, &a.fit))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = learning_curve(&ds, &fractions, &seeds, &configs, &grid)?;
    let mut w = create(&out)?;
    write_curve_csv(&rows, &mut w)?;
    finish(w, Some(&out))?;
    config::echo("curve", &a, &out)?;

    let metric = rows.first().map_or("", |r| r.metric.as_str());
    println!("{:<14} {:>8}  {:>10} {:>8}  failed", "method", "fraction", format!("mean {metric}"), "sd");
    for m in &methods {
        for &f in &fractions {
            let cell: Vec<_> = rows.iter().filter(|r| r.method == m.name() && r.fraction == f).collect();
            let ok: Vec<f64> = cell.iter().filter(|r| !r.failed()).map(|r| r.value).collect();
            let mean = ok.iter().sum::<f64>() / ok.len() as f64;
            let sd = if ok.len() > 1 {
                (ok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (ok.len() - 1) as f64).sqrt()
            } else {
                f64::NAN
            };
            println!("{:<14} {:>8} {:>10.4} {:>8.4}  {}", m.name(), f, mean, sd, cell.len() - ok.len());
        }
    }
    println!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}
