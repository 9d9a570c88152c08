use std::collections::HashMap;

use super::{Dataset, EncodedFeature, FeatureSchema, Scaling};
use crate::error::{Result, SpsmError};

/// Standardize numeric columns to observed-value mean 0 and population
/// standard deviation 1. One-hot columns are left alone. Numeric columns
/// with no observed values or zero variance are dropped with a warning; the
/// parent's mask bit is kept so missingness stays visible to the patterns.
pub fn standardize(ds: &Dataset) -> Result<Dataset> {
    let schema = ds.schema();
    if schema.standardized {
        return Err(SpsmError::Validation("dataset is already standardized".into()));
    }
    let mut encoded = Vec::with_capacity(schema.n_encoded());
    for (j, e) in schema.encoded.iter().enumerate() {
        if e.level.is_some() {
            encoded.push(e.clone());
            continue;
        }
        let observed: Vec<f64> = ds.rows().iter().filter_map(|r| r[j]).collect();
        if observed.is_empty() {
            log::warn!("dropping feature {}: no observed values", e.name);
            continue;
        }
        let n = observed.len() as f64;
        let mean = observed.iter().sum::<f64>() / n;
        let var = observed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        if !(sd > f64::EPSILON * mean.abs().max(1.0)) {
            log::warn!("dropping feature {}: constant observed value {mean}", e.name);
            continue;
        }
        encoded.push(EncodedFeature {
            scaling: Some(Scaling { mean, sd }),
            ..e.clone()
        });
    }
    let target = FeatureSchema {
        encoded,
        standardized: true,
        ..schema.clone()
    };
    apply_standardization(ds, &target)
}

/// Transform a raw dataset with previously computed training statistics.
pub fn apply_standardization(ds: &Dataset, schema: &FeatureSchema) -> Result<Dataset> {
    if ds.schema().standardized {
        return Err(SpsmError::Validation("dataset is already standardized".into()));
    }
    if ds.schema().original != schema.original {
        let theirs = &ds.schema().original;
        let mut columns: Vec<String> = schema
            .original
            .iter()
            .filter(|f| !theirs.contains(f))
            .map(|f| f.name.clone())
            .collect();
        columns.extend(
            theirs
                .iter()
                .filter(|f| !schema.original.contains(f))
                .map(|f| f.name.clone()),
        );
        return Err(SpsmError::SchemaMismatch {
            message: "feature definitions differ from the trained schema".into(),
            columns,
        });
    }
    let rows = conform_rows(ds.schema(), ds.rows().to_vec(), schema)?;
    Dataset::new(schema.clone(), rows, ds.targets().to_vec(), ds.masks().to_vec())
}

/// Map rows encoded under `raw` onto the columns of `target`, scaling where
/// the target carries statistics.
pub(crate) fn conform_rows(
    raw: &FeatureSchema,
    rows: Vec<Vec<Option<f64>>>,
    target: &FeatureSchema,
) -> Result<Vec<Vec<Option<f64>>>> {
    let index: HashMap<&str, usize> = raw
        .encoded
        .iter()
        .enumerate()
        .map(|(j, e)| (e.name.as_str(), j))
        .collect();
    let absent: Vec<String> = target
        .encoded
        .iter()
        .filter(|e| !index.contains_key(e.name.as_str()))
        .map(|e| e.name.clone())
        .collect();
    if !absent.is_empty() {
        return Err(SpsmError::SchemaMismatch {
            message: "encoded columns missing".into(),
            columns: absent,
        });
    }
    let map: Vec<(usize, Option<Scaling>)> = target
        .encoded
        .iter()
        .map(|e| (index[e.name.as_str()], e.scaling))
        .collect();
    Ok(rows
        .into_iter()
        .map(|row| {
            map.iter()
                .map(|&(src, scaling)| {
                    row[src].map(|v| match scaling {
                        Some(s) => (v - s.mean) / s.sd,
                        None => v,
                    })
                })
                .collect()
        })
        .collect())
}

/// Undo standardization. Dropped columns stay dropped.
pub fn destandardize(ds: &Dataset) -> Result<Dataset> {
    let schema = ds.schema();
    let rows = ds
        .rows()
        .iter()
        .map(|row| {
            row.iter()
                .zip(&schema.encoded)
                .map(|(c, e)| match (c, e.scaling) {
                    (Some(v), Some(s)) => Some(v * s.sd + s.mean),
                    (c, _) => *c,
                })
                .collect()
        })
        .collect();
    let raw = FeatureSchema {
        encoded: schema
            .encoded
            .iter()
            .map(|e| EncodedFeature {
                scaling: None,
                ..e.clone()
            })
            .collect(),
        standardized: false,
        ..schema.clone()
    };
    Dataset::new(raw, rows, ds.targets().to_vec(), ds.masks().to_vec())
}
