use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Trim, WriterBuilder};

use super::scale::conform_rows;
use super::{Dataset, FeatureKind, FeatureSchema, OriginalFeature, PatternMask};
use crate::error::{Result, SpsmError};

const MISSING_TOKEN: &str = "NaN";

/// Encoded feature rows read against a known schema; targets are present only
/// when the file carries the target column.
#[derive(Debug, Clone)]
pub struct FeatureRows {
    pub rows: Vec<Vec<Option<f64>>>,
    pub masks: Vec<PatternMask>,
    pub targets: Option<Vec<f64>>,
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == MISSING_TOKEN
}

fn parse_number(cell: &str, row: usize, column: &str) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(SpsmError::Parse {
            row,
            message: format!("column {column}: {cell:?} is not a finite number"),
        }),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| SpsmError::io(path, e))
}

fn read_records<R: Read>(reader: R) -> Result<(Vec<String>, Vec<StringRecord>)> {
    let mut rdr = ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(SpsmError::Parse {
                row: i + 1,
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        records.push(rec);
    }
    Ok((headers, records))
}

/// Ingest a CSV file. Every non-target column is a feature; columns named in
/// `categorical` are one-hot encoded over their observed levels (sorted).
pub fn ingest_csv(path: impl AsRef<Path>, target: &str, categorical: &[&str]) -> Result<Dataset> {
    let path = path.as_ref();
    read_csv(open(path)?, target, categorical)
}

pub fn read_csv<R: Read>(reader: R, target: &str, categorical: &[&str]) -> Result<Dataset> {
    let (headers, records) = read_records(reader)?;
    if !headers.iter().any(|h| h == target) {
        return Err(SpsmError::Validation(format!(
            "target column {target:?} not found"
        )));
    }
    let absent: Vec<String> = categorical
        .iter()
        .filter(|c| !headers.iter().any(|h| h == *c))
        .map(|c| c.to_string())
        .collect();
    if !absent.is_empty() {
        return Err(SpsmError::SchemaMismatch {
            message: "categorical columns not in header".into(),
            columns: absent,
        });
    }

    let mut original = Vec::new();
    for (col, name) in headers.iter().enumerate() {
        if name == target {
            continue;
        }
        let kind = if categorical.contains(&name.as_str()) {
            let levels: BTreeSet<&str> = records
                .iter()
                .map(|r| &r[col])
                .filter(|c| !is_missing(c))
                .collect();
            FeatureKind::Categorical {
                levels: levels.into_iter().map(str::to_owned).collect(),
            }
        } else {
            FeatureKind::Numeric
        };
        original.push(OriginalFeature {
            name: name.clone(),
            kind,
        });
    }
    let schema = FeatureSchema::new(target, original);
    let parsed = encode(&headers, &records, &schema, true)?;
    Dataset::new(
        schema,
        parsed.rows,
        parsed.targets.expect("target required"),
        parsed.masks,
    )
}

/// Ingest a labelled CSV against a trained schema, applying its statistics.
pub fn ingest_with_schema(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset> {
    let (headers, records) = read_records(open(path.as_ref())?)?;
    let raw = schema.raw();
    let parsed = encode(&headers, &records, &raw, true)?;
    let rows = conform_rows(&raw, parsed.rows, schema)?;
    Dataset::new(
        schema.clone(),
        rows,
        parsed.targets.expect("target required"),
        parsed.masks,
    )
}

/// Read feature rows against a trained schema; the target column is optional.
pub fn read_features(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<FeatureRows> {
    let (headers, records) = read_records(open(path.as_ref())?)?;
    let raw = schema.raw();
    let parsed = encode(&headers, &records, &raw, false)?;
    let rows = conform_rows(&raw, parsed.rows, schema)?;
    Ok(FeatureRows { rows, ..parsed })
}

fn encode(
    headers: &[String],
    records: &[StringRecord],
    schema: &FeatureSchema,
    require_target: bool,
) -> Result<FeatureRows> {
    let index: HashMap<&str, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.as_str(), i))
        .collect();
    let absent: Vec<String> = schema
        .original
        .iter()
        .filter(|f| !index.contains_key(f.name.as_str()))
        .map(|f| f.name.clone())
        .collect();
    if !absent.is_empty() {
        return Err(SpsmError::SchemaMismatch {
            message: "feature columns missing from input".into(),
            columns: absent,
        });
    }
    let target_col = index.get(schema.target.as_str()).copied();
    if require_target && target_col.is_none() {
        return Err(SpsmError::Validation(format!(
            "target column {:?} not found",
            schema.target
        )));
    }
    let columns: Vec<usize> = schema.original.iter().map(|f| index[f.name.as_str()]).collect();

    let d = schema.n_original();
    let mut rows = Vec::with_capacity(records.len());
    let mut masks = Vec::with_capacity(records.len());
    let mut targets = target_col.map(|_| Vec::with_capacity(records.len()));
    let mut unknown_levels = BTreeSet::new();

    for (i, rec) in records.iter().enumerate() {
        let row_no = i + 1;
        let mut bits = vec![false; d];
        let mut row = Vec::with_capacity(schema.n_encoded());
        for (j, f) in schema.original.iter().enumerate() {
            let cell = &rec[columns[j]];
            let missing = is_missing(cell);
            bits[j] = missing;
            match &f.kind {
                FeatureKind::Numeric => row.push(if missing {
                    None
                } else {
                    Some(parse_number(cell, row_no, &f.name)?)
                }),
                FeatureKind::Categorical { levels } => {
                    if missing {
                        row.extend(std::iter::repeat_n(None, levels.len()));
                    } else {
                        if !levels.iter().any(|l| l == cell) {
                            unknown_levels.insert(format!("{}={}", f.name, cell));
                        }
                        row.extend(levels.iter().map(|l| Some(if l == cell { 1.0 } else { 0.0 })));
                    }
                }
            }
        }
        if let (Some(col), Some(t)) = (target_col, targets.as_mut()) {
            let cell = &rec[col];
            if is_missing(cell) {
                if require_target {
                    return Err(SpsmError::Validation(format!(
                        "row {row_no}: target {:?} is missing",
                        schema.target
                    )));
                }
                t.push(f64::NAN);
            } else {
                t.push(parse_number(cell, row_no, &schema.target)?);
            }
        }
        rows.push(row);
        masks.push(PatternMask::new(bits));
    }
    if !unknown_levels.is_empty() {
        log::warn!(
            "levels unseen in training encoded as all-zero: {}",
            unknown_levels.into_iter().collect::<Vec<_>>().join(", ")
        );
    }
    // A partially labelled prediction file is treated as unlabelled.
    if !require_target && targets.as_ref().is_some_and(|t| t.iter().any(|v| v.is_nan())) {
        targets = None;
    }
    Ok(FeatureRows {
        rows,
        masks,
        targets,
    })
}

/// Write a dataset as CSV at original-feature granularity, undoing any
/// standardization. Features whose encoded columns were all dropped are
/// omitted. Numbers use the shortest representation that round-trips.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let schema = ds.schema();
    let children: Vec<Vec<usize>> = (0..schema.n_original())
        .map(|p| {
            schema
                .encoded
                .iter()
                .enumerate()
                .filter(|(_, e)| e.parent == p)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    let kept: Vec<usize> = (0..schema.n_original())
        .filter(|&p| !children[p].is_empty())
        .collect();

    let mut w = WriterBuilder::new().from_writer(writer);
    let mut header: Vec<&str> = kept.iter().map(|&p| schema.original[p].name.as_str()).collect();
    header.push(&schema.target);
    w.write_record(&header)?;

    for (i, row) in ds.rows().iter().enumerate() {
        let mut out = Vec::with_capacity(kept.len() + 1);
        for &p in &kept {
            if ds.masks()[i].is_missing(p) {
                out.push(String::new());
                continue;
            }
            match &schema.original[p].kind {
                FeatureKind::Numeric => {
                    let j = children[p][0];
                    let mut v = row[j].expect("observed cell");
                    if let Some(s) = schema.encoded[j].scaling {
                        v = v * s.sd + s.mean;
                    }
                    out.push(v.to_string());
                }
                FeatureKind::Categorical { levels } => {
                    let hot = children[p]
                        .iter()
                        .find(|&&j| row[j] == Some(1.0))
                        .and_then(|&j| schema.encoded[j].level);
                    out.push(hot.map(|l| levels[l].clone()).unwrap_or_default());
                }
            }
        }
        out.push(ds.targets()[i].to_string());
        w.write_record(&out)?;
    }
    w.flush().map_err(|e| SpsmError::io("<csv output>", e))?;
    Ok(())
}
