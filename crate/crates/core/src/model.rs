//! Serialized models. A model file is JSON with a `format_version` and a
//! `method` tag; the remaining fields depend on the method. Floats are
//! written in shortest round-trip form, so save/load is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::ImputedModel;
use crate::data::{Dataset, FeatureSchema, PatternMask};
use crate::error::{Result, SpsmError};
use crate::patterns::Resolution;
use crate::spsm::{SpsmModel, Task, ZERO_THRESHOLD};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum FittedModel {
    Spsm(SpsmModel),
    Psm(SpsmModel),
    FullSharing(SpsmModel),
    ImputedRidge(ImputedModel),
    ImputedLogistic(ImputedModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    #[serde(flatten)]
    pub model: FittedModel,
}

/// One prediction; `resolution` is `None` for models without patterns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowPrediction {
    pub value: f64,
    pub resolution: Option<Resolution>,
}

impl RowPrediction {
    pub fn pattern_id(&self) -> Option<usize> {
        self.resolution.and_then(|r| r.pattern_id())
    }

    pub fn is_fallback(&self) -> bool {
        self.resolution.is_some_and(|r| r.is_fallback())
    }
}

impl FittedModel {
    pub fn method_name(&self) -> &'static str {
        match self {
            FittedModel::Spsm(_) => "spsm",
            FittedModel::Psm(_) => "psm",
            FittedModel::FullSharing(_) => "full_sharing",
            FittedModel::ImputedRidge(_) => "imputed_ridge",
            FittedModel::ImputedLogistic(_) => "imputed_logistic",
        }
    }

    pub fn as_spsm(&self) -> Option<&SpsmModel> {
        match self {
            FittedModel::Spsm(m) | FittedModel::Psm(m) | FittedModel::FullSharing(m) => Some(m),
            _ => None,
        }
    }

    pub fn schema(&self) -> &FeatureSchema {
        match self {
            FittedModel::Spsm(m) | FittedModel::Psm(m) | FittedModel::FullSharing(m) => &m.schema,
            FittedModel::ImputedRidge(m) | FittedModel::ImputedLogistic(m) => &m.schema,
        }
    }

    pub fn task(&self) -> Task {
        match self {
            FittedModel::Spsm(m) | FittedModel::Psm(m) | FittedModel::FullSharing(m) => m.task,
            FittedModel::ImputedRidge(m) | FittedModel::ImputedLogistic(m) => m.task,
        }
    }

    /// Shared and pattern-specific nonzero coefficient counts. Every PSM
    /// coefficient belongs to a submodel, so PSM reports no shared ones: the
    /// count is over specialized submodels plus the complete-case model when
    /// some pattern falls back to it.
    pub fn nonzero_counts(&self) -> (usize, usize) {
        match self {
            FittedModel::Psm(m) => {
                let nz = |v: &f64| v.abs() >= ZERO_THRESHOLD;
                let mut specific: usize = m
                    .registry
                    .entries()
                    .iter()
                    .filter(|e| e.specialized)
                    .map(|e| m.submodel(e.id).iter().filter(|v| nz(v)).count())
                    .sum();
                if m.registry.entries().iter().any(|e| !e.specialized) {
                    specific += m.theta.iter().filter(|v| nz(v)).count();
                }
                (0, specific)
            }
            FittedModel::Spsm(m) | FittedModel::FullSharing(m) => m.nonzero_counts(),
            FittedModel::ImputedRidge(m) | FittedModel::ImputedLogistic(m) => {
                (m.nonzero_count(), 0)
            }
        }
    }

    pub fn predict_row(&self, x: &[Option<f64>], mask: &PatternMask) -> Result<RowPrediction> {
        match self.as_spsm() {
            Some(m) => {
                let p = m.predict(x, mask)?;
                Ok(RowPrediction {
                    value: p.value,
                    resolution: Some(p.resolution),
                })
            }
            None => {
                let value = match self {
                    FittedModel::ImputedRidge(m) | FittedModel::ImputedLogistic(m) => m.predict(x)?,
                    _ => unreachable!("pattern models handled above"),
                };
                Ok(RowPrediction {
                    value,
                    resolution: None,
                })
            }
        }
    }

    /// Predict every row of a dataset encoded with this model's schema.
    pub fn predict(&self, ds: &Dataset) -> Result<Vec<RowPrediction>> {
        self.check_schema(ds.schema())?;
        ds.rows()
            .iter()
            .zip(ds.masks())
            .map(|(x, m)| self.predict_row(x, m))
            .collect()
    }

    pub fn predict_values(&self, ds: &Dataset) -> Result<Vec<f64>> {
        Ok(self.predict(ds)?.into_iter().map(|p| p.value).collect())
    }

    pub fn check_schema(&self, other: &FeatureSchema) -> Result<()> {
        let ours = self.schema();
        if ours.encoded_names() == other.encoded_names() && ours.original == other.original {
            return Ok(());
        }
        let theirs = other.encoded_names();
        let mut columns: Vec<String> = ours
            .encoded_names()
            .into_iter()
            .filter(|n| !theirs.contains(n))
            .map(String::from)
            .collect();
        if columns.is_empty() {
            columns = theirs.iter().map(|s| s.to_string()).collect();
        }
        Err(SpsmError::SchemaMismatch {
            message: "dataset columns differ from the model's".into(),
            columns,
        })
    }
}

impl ModelFile {
    pub fn new(model: FittedModel) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != FORMAT_VERSION {
            return Err(SpsmError::Validation(format!(
                "unsupported model format_version {}, expected {FORMAT_VERSION}",
                file.format_version
            )));
        }
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| SpsmError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SpsmError::io(path, e))?;
        Self::from_json(&text)
    }
}
