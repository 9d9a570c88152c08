//! Specialization tables: for each pattern with a nonzero Δ, the affected
//! features with Δ, θ and θ + Δ, plus the pattern intercept.

use std::io::Write;

use spsm_core::spsm::ZERO_THRESHOLD;
use spsm_core::{FittedModel, ModelFile, SpsmModel};

use crate::args::InspectArgs;
use crate::commands::require;
use crate::config;
use crate::failure::{self, Failure};

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub feature: String,
    pub delta: f64,
    pub theta: f64,
}

impl Row {
    pub fn total(&self) -> f64 {
        self.theta + self.delta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternTable {
    pub id: usize,
    pub mask: String,
    pub count: usize,
    pub missing: Vec<String>,
    /// Features with nonzero Δ, then the intercept row.
    pub rows: Vec<Row>,
}

pub fn tables(model: &SpsmModel) -> Vec<PatternTable> {
    let names = model.schema.encoded_names();
    model
        .registry
        .entries()
        .iter()
        .filter_map(|e| {
            let p = &model.patterns[e.id];
            let mut rows: Vec<Row> = model
                .observed(e.id)
                .into_iter()
                .zip(&p.delta)
                .filter(|(_, d)| d.abs() > ZERO_THRESHOLD)
                .map(|(j, &delta)| Row {
                    feature: names[j].to_string(),
                    delta,
                    theta: model.theta[j],
                })
                .collect();
            if rows.is_empty() {
                return None;
            }
            rows.push(Row {
                feature: "(intercept)".into(),
                delta: p.alpha,
                theta: model.intercept,
            });
            Some(PatternTable {
                id: e.id,
                mask: e.mask.to_string(),
                count: e.count,
                missing: model.schema.missing_names(&e.mask).into_iter().map(String::from).collect(),
                rows,
            })
        })
        .collect()
}

fn render(tables: &[PatternTable]) -> String {
    let mut s = String::new();
    for t in tables {
        let missing = if t.missing.is_empty() {
            "none".to_string()
        } else {
            t.missing.join(", ")
        };
        s += &format!("pattern {} [{}], n = {}, missing: {missing}\n", t.id, t.mask, t.count);
        s += &format!("  {:<24} {:>10} {:>10} {:>10}\n", "feature", "delta", "theta", "theta+delta");
        for r in &t.rows {
            s += &format!("  {:<24} {:>10.4} {:>10.4} {:>10.4}\n", r.feature, r.delta, r.theta, r.total());
        }
        s += "\n";
    }
    s
}

fn write_csv(tables: &[PatternTable], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "pattern_id,mask,n,missing,feature,delta,theta,total")?;
    for t in tables {
        for r in &t.rows {
            writeln!(
                w,
                "{},{},{},\"{}\",\"{}\",{},{},{}",
                t.id,
                t.mask,
                t.count,
                t.missing.join(";"),
                r.feature,
                r.delta,
                r.theta,
                r.total()
            )?;
        }
    }
    w.flush()
}

pub fn run(a: InspectArgs) -> Result<(), Failure> {
    let path = require(&a.model, "model")?;
    let model = ModelFile::load(path)?.model;
    let found = match &model {
        FittedModel::Spsm(m) | FittedModel::Psm(m) | FittedModel::FullSharing(m) => tables(m),
        FittedModel::ImputedRidge(_) | FittedModel::ImputedLogistic(_) => Vec::new(),
    };
    let (k, l) = model.nonzero_counts();
    println!("{} model, nonzero coefficients {k} + {l} (shared + pattern-specific)", model.method_name());
    if found.is_empty() {
        println!("no specialized patterns");
    } else {
        println!("coefficients are for standardized features\n");
        print!("{}", render(&found));
    }
    if let Some(csv) = &a.csv {
        let file = std::fs::File::create(csv).map_err(|e| failure::io(csv, e))?;
        write_csv(&found, std::io::BufWriter::new(file)).map_err(|e| failure::io(csv, e))?;
        config::echo("inspect", &a, csv)?;
    }
    Ok(())
}
