//! Config-file merging. A config file is a JSON object whose keys are the
//! command's option names in snake_case; flags given on the command line
//! take precedence over it.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::failure::{self, Failure};

pub fn resolve<T: Serialize + DeserializeOwned>(flags: T, config: Option<&Path>) -> Result<T, Failure> {
    let Some(path) = config else {
        return Ok(flags);
    };
    let text = std::fs::read_to_string(path).map_err(|e| failure::io(path, e))?;
    let file: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::input(format!("config {}: {e}", path.display())))?;
    let Value::Object(file) = file else {
        return Err(Failure::input(format!("config {} is not a JSON object", path.display())));
    };
    let Value::Object(mut merged) = to_value(&flags)? else {
        return Err(Failure::internal("options do not serialize to an object"));
    };
    for (key, value) in file {
        if key == "command" {
            continue;
        }
        match merged.get_mut(&key) {
            None => {
                return Err(Failure::input(format!(
                    "config {}: unknown option {key:?}",
                    path.display()
                )))
            }
            Some(slot) if slot.is_null() => *slot = value,
            Some(_) => {}
        }
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| Failure::input(format!("config {}: {e}", path.display())))
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, Failure> {
    serde_json::to_value(v).map_err(|e| Failure::internal(e.to_string()))
}

/// `dir/name.csv` becomes `dir/name.<suffix>`.
pub fn sidecar(output: &Path, suffix: &str) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    output.with_file_name(format!("{stem}.{suffix}"))
}

/// Write the effective options next to `output` as `<stem>.config.json`.
pub fn echo<T: Serialize>(command: &str, effective: &T, output: &Path) -> Result<(), Failure> {
    let mut object = Map::new();
    object.insert("command".into(), Value::String(command.into()));
    if let Value::Object(fields) = to_value(effective)? {
        object.extend(fields.into_iter().filter(|(_, v)| !v.is_null()));
    }
    let path = sidecar(output, "config.json");
    let text = serde_json::to_string_pretty(&Value::Object(object))
        .map_err(|e| Failure::internal(e.to_string()))?;
    std::fs::write(&path, text + "\n").map_err(|e| failure::io(&path, e))
}
