//! Tabular data with missing cells.
//!
//! Cells are `Option<f64>`; `None` is missing. Missingness masks live at the
//! granularity of the original columns, so a missing categorical cell marks
//! every one-hot child missing and sets a single mask bit.

mod io;
mod mask;
mod scale;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpsmError};

pub use io::{ingest_csv, ingest_with_schema, read_csv, read_features, write_csv, FeatureRows};
pub use mask::PatternMask;
pub use scale::{apply_standardization, destandardize, standardize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriginalFeature {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

/// Training-set statistics for one numeric column. `sd` is the population
/// standard deviation over observed values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedFeature {
    pub name: String,
    /// Index into [`FeatureSchema::original`].
    pub parent: usize,
    /// Level index for one-hot columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<Scaling>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub target: String,
    pub original: Vec<OriginalFeature>,
    pub encoded: Vec<EncodedFeature>,
    /// Set once training statistics have been applied.
    #[serde(default)]
    pub standardized: bool,
}

impl FeatureSchema {
    /// Schema with one encoded column per numeric feature and full dummy
    /// coding (no reference level) for categoricals.
    pub fn new(target: impl Into<String>, original: Vec<OriginalFeature>) -> Self {
        let encoded = raw_encoding(&original);
        FeatureSchema {
            target: target.into(),
            original,
            encoded,
            standardized: false,
        }
    }

    pub fn n_original(&self) -> usize {
        self.original.len()
    }

    pub fn n_encoded(&self) -> usize {
        self.encoded.len()
    }

    pub fn encoded_names(&self) -> Vec<&str> {
        self.encoded.iter().map(|e| e.name.as_str()).collect()
    }

    /// Encoded columns whose parent feature is observed under `mask`.
    pub fn observed_encoded(&self, mask: &PatternMask) -> Vec<usize> {
        self.encoded
            .iter()
            .enumerate()
            .filter(|(_, e)| !mask.is_missing(e.parent))
            .map(|(j, _)| j)
            .collect()
    }

    /// Names of the original features missing under `mask`.
    pub fn missing_names(&self, mask: &PatternMask) -> Vec<&str> {
        mask.missing_indices()
            .into_iter()
            .map(|j| self.original[j].name.as_str())
            .collect()
    }

    /// The same original features without statistics or dropped columns.
    pub fn raw(&self) -> FeatureSchema {
        FeatureSchema::new(self.target.clone(), self.original.clone())
    }

    pub(crate) fn validate(&self) -> Result<()> {
        for (j, e) in self.encoded.iter().enumerate() {
            let parent = self.original.get(e.parent).ok_or_else(|| {
                SpsmError::Validation(format!(
                    "encoded feature {j} ({}) has no parent {}",
                    e.name, e.parent
                ))
            })?;
            match (&parent.kind, e.level) {
                (FeatureKind::Numeric, None) => {}
                (FeatureKind::Categorical { levels }, Some(l)) if l < levels.len() => {}
                _ => {
                    return Err(SpsmError::Validation(format!(
                        "encoded feature {} inconsistent with parent {}",
                        e.name, parent.name
                    )))
                }
            }
            if let Some(s) = e.scaling {
                if !(s.sd > 0.0 && s.sd.is_finite() && s.mean.is_finite()) {
                    return Err(SpsmError::Validation(format!(
                        "feature {} has invalid scaling {s:?}",
                        e.name
                    )));
                }
            }
        }
        Ok(())
    }
}

fn raw_encoding(original: &[OriginalFeature]) -> Vec<EncodedFeature> {
    let mut encoded = Vec::new();
    for (parent, f) in original.iter().enumerate() {
        match &f.kind {
            FeatureKind::Numeric => encoded.push(EncodedFeature {
                name: f.name.clone(),
                parent,
                level: None,
                scaling: None,
            }),
            FeatureKind::Categorical { levels } => {
                for (l, level) in levels.iter().enumerate() {
                    encoded.push(EncodedFeature {
                        name: format!("{}={}", f.name, level),
                        parent,
                        level: Some(l),
                        scaling: None,
                    });
                }
            }
        }
    }
    encoded
}

/// Encoded rows, targets and per-row masks. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: FeatureSchema,
    rows: Vec<Vec<Option<f64>>>,
    targets: Vec<f64>,
    masks: Vec<PatternMask>,
}

impl Dataset {
    pub fn new(
        schema: FeatureSchema,
        rows: Vec<Vec<Option<f64>>>,
        targets: Vec<f64>,
        masks: Vec<PatternMask>,
    ) -> Result<Self> {
        schema.validate()?;
        if rows.len() != targets.len() || rows.len() != masks.len() {
            return Err(SpsmError::Validation(format!(
                "{} rows, {} targets, {} masks",
                rows.len(),
                targets.len(),
                masks.len()
            )));
        }
        for (i, (row, mask)) in rows.iter().zip(&masks).enumerate() {
            if row.len() != schema.n_encoded() || mask.len() != schema.n_original() {
                return Err(SpsmError::Validation(format!(
                    "row {i} has {} cells and a {}-bit mask; schema expects {} and {}",
                    row.len(),
                    mask.len(),
                    schema.n_encoded(),
                    schema.n_original()
                )));
            }
            for (cell, e) in row.iter().zip(&schema.encoded) {
                if cell.is_none() != mask.is_missing(e.parent) {
                    return Err(SpsmError::Validation(format!(
                        "row {i}: cell {} disagrees with mask {mask}",
                        e.name
                    )));
                }
                if matches!(cell, Some(v) if !v.is_finite()) {
                    return Err(SpsmError::Validation(format!(
                        "row {i}: non-finite value in {}",
                        e.name
                    )));
                }
            }
        }
        if let Some(i) = targets.iter().position(|t| !t.is_finite()) {
            return Err(SpsmError::Validation(format!("row {i}: non-finite target")));
        }
        Ok(Dataset {
            schema,
            rows,
            targets,
            masks,
        })
    }

    /// Fully observed dataset from dense rows, numeric features named
    /// `x1..xd`, target `y`.
    pub fn from_dense(rows: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let masks = vec![PatternMask::complete(d); rows.len()];
        let rows = rows
            .into_iter()
            .map(|r| r.into_iter().map(Some).collect())
            .collect();
        Dataset::new(numeric_schema(d), rows, targets, masks)
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.rows
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn masks(&self) -> &[PatternMask] {
        &self.masks
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_encoded(&self) -> usize {
        self.schema.n_encoded()
    }

    /// Row with missing cells replaced by zero.
    pub fn zero_filled(&self, i: usize) -> Vec<f64> {
        self.rows[i].iter().map(|c| c.unwrap_or(0.0)).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            masks: indices.iter().map(|&i| self.masks[i].clone()).collect(),
        }
    }

    /// Same cells with different targets.
    pub fn with_targets(&self, targets: Vec<f64>) -> Result<Dataset> {
        Dataset::new(
            self.schema.clone(),
            self.rows.clone(),
            targets,
            self.masks.clone(),
        )
    }
}

/// Schema of `d` numeric features `x1..xd` with target `y`.
pub fn numeric_schema(d: usize) -> FeatureSchema {
    let original = (1..=d)
        .map(|j| OriginalFeature {
            name: format!("x{j}"),
            kind: FeatureKind::Numeric,
        })
        .collect();
    FeatureSchema::new("y", original)
}

/// Distinct masks with their sample counts, in lexicographic mask order.
pub fn extract_patterns(ds: &Dataset) -> Vec<(PatternMask, usize)> {
    let mut counts: BTreeMap<&PatternMask, usize> = BTreeMap::new();
    for m in ds.masks() {
        *counts.entry(m).or_default() += 1;
    }
    counts.into_iter().map(|(m, n)| (m.clone(), n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn masked(rows: &[&str]) -> Dataset {
        let d = rows[0].len();
        let masks: Vec<PatternMask> = rows.iter().map(|s| s.parse().unwrap()).collect();
        let cells = masks
            .iter()
            .map(|m| (0..d).map(|j| (!m.is_missing(j)).then_some(1.0)).collect())
            .collect();
        Dataset::new(numeric_schema(d), cells, vec![0.0; rows.len()], masks).unwrap()
    }

    #[test]
    fn pattern_counts_in_lexicographic_order() {
        let ds = masked(&["01", "00", "11", "00"]);
        let pats: Vec<(String, usize)> = extract_patterns(&ds)
            .into_iter()
            .map(|(m, n)| (m.to_string(), n))
            .collect();
        assert_eq!(
            pats,
            [("00".into(), 2), ("01".into(), 1), ("11".into(), 1)]
        );
    }

    #[test]
    fn fully_observed_is_single_pattern() {
        let ds = Dataset::from_dense(vec![vec![1.0, 2.0]; 7], vec![0.0; 7]).unwrap();
        let pats = extract_patterns(&ds);
        assert_eq!(pats.len(), 1);
        assert_eq!(pats[0].0.to_string(), "00");
        assert_eq!(pats[0].1, 7);
    }

    #[test]
    fn rejects_cell_mask_disagreement() {
        let schema = numeric_schema(2);
        let err = Dataset::new(
            schema,
            vec![vec![Some(1.0), Some(2.0)]],
            vec![0.0],
            vec!["01".parse().unwrap()],
        );
        assert!(matches!(err, Err(SpsmError::Validation(_))));
    }

    #[test]
    fn observed_encoded_follows_parents() {
        let schema = FeatureSchema::new(
            "y",
            vec![
                OriginalFeature {
                    name: "a".into(),
                    kind: FeatureKind::Numeric,
                },
                OriginalFeature {
                    name: "c".into(),
                    kind: FeatureKind::Categorical {
                        levels: vec!["A".into(), "B".into()],
                    },
                },
            ],
        );
        assert_eq!(schema.encoded_names(), ["a", "c=A", "c=B"]);
        let m: PatternMask = "01".parse().unwrap();
        assert_eq!(schema.observed_encoded(&m), vec![0]);
        assert_eq!(schema.missing_names(&m), vec!["c"]);
    }
}
