//! Trajectory files and provenance sidecars.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::Configuration;
use crate::dynamics::Trajectory;
use crate::error::{HkError, Result};

/// One line of a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLine {
    pub t: usize,
    /// Scalars in one dimension, coordinate vectors otherwise.
    pub positions: Value,
}

fn positions_value(x: &Configuration) -> Value {
    if x.dim() == 1 {
        Value::from(x.coords().to_vec())
    } else {
        Value::from(x.points().map(|p| p.to_vec()).collect::<Vec<_>>())
    }
}

/// Writes `{"t": .., "positions": [..]}` per configuration, one per line.
pub fn write_trajectory_jsonl<W: Write>(mut out: W, traj: &Trajectory) -> Result<()> {
    for (t, x) in traj.configs.iter().enumerate() {
        let line = TrajectoryLine {
            t,
            positions: positions_value(x),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")
            .map_err(|e| HkError::io("<trajectory>", e))?;
    }
    out.flush().map_err(|e| HkError::io("<trajectory>", e))
}

/// Reads configurations back from a trajectory file.
pub fn read_trajectory_jsonl<R: BufRead>(input: R, confidence: f64) -> Result<Vec<Configuration>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line.map_err(|e| HkError::io("<trajectory>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TrajectoryLine = serde_json::from_str(&line)?;
        if rec.t != out.len() {
            return Err(HkError::Parse(format!(
                "expected t={}, found t={}",
                out.len(),
                rec.t
            )));
        }
        let config = match serde_json::from_value::<Vec<f64>>(rec.positions.clone()) {
            Ok(xs) => Configuration::from_flat(xs, 1, confidence)?,
            Err(_) => Configuration::new(serde_json::from_value(rec.positions)?, confidence)?,
        };
        out.push(config);
    }
    Ok(out)
}

/// `<out>.meta.json` next to an output file.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Records the command line, seed and parameters that produced `out`.
pub fn write_provenance(out: &Path, meta: &Value) -> Result<PathBuf> {
    let path = sidecar_path(out);
    let mut record = serde_json::Map::new();
    record.insert(
        "tool".into(),
        Value::from(concat!("hkdyn ", env!("CARGO_PKG_VERSION"))),
    );
    record.insert("output".into(), Value::from(out.display().to_string()));
    if let Value::Object(m) = meta {
        record.extend(m.clone());
    } else {
        record.insert("meta".into(), meta.clone());
    }
    let text = serde_json::to_string_pretty(&Value::Object(record))?;
    std::fs::write(&path, text).map_err(|e| HkError::io(&path, e))?;
    Ok(path)
}

pub fn load_configuration(path: &Path) -> Result<Configuration> {
    let text = std::fs::read_to_string(path).map_err(|e| HkError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
