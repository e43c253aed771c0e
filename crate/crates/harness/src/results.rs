//! Raw measurement records on disk.
//!
//! Every measurement command writes per-run records, not only aggregates,
//! so analytics can re-run offline. A results directory holds one JSON
//! record per measured cell under `cells/`, and per-workload matrix
//! summaries under `matrix/`. Schemas are documented in docs/schemas.md.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use benchwatch_core::measure::{ConfigMatrix, MeasurementSet};

use crate::error::HarnessError;

pub const RESULTS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRecord {
    pub schema_version: u32,
    pub measurement: MeasurementSet,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub schema_version: u32,
    pub matrix: ConfigMatrix,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn cell_record_path(dir: &Path, set: &MeasurementSet) -> PathBuf {
    dir.join("cells")
        .join(format!("{}.{}.{}.json", set.workload, set.mode, set.device))
}

pub fn write_cell_record(dir: &Path, set: &MeasurementSet) -> Result<PathBuf, HarnessError> {
    let path = cell_record_path(dir, set);
    write_json(
        &path,
        &CellRecord {
            schema_version: RESULTS_SCHEMA_VERSION,
            measurement: set.clone(),
        },
    )?;
    Ok(path)
}

pub fn write_matrix_record(dir: &Path, matrix: &ConfigMatrix) -> Result<PathBuf, HarnessError> {
    let path = dir.join("matrix").join(format!("{}.json", matrix.workload));
    write_json(
        &path,
        &MatrixRecord {
            schema_version: RESULTS_SCHEMA_VERSION,
            matrix: matrix.clone(),
        },
    )?;
    for set in matrix.measured_sets() {
        write_cell_record(dir, set)?;
    }
    Ok(path)
}

/// Loads every cell record under `dir/cells`.
pub fn read_results_dir(dir: &Path) -> Result<Vec<MeasurementSet>, HarnessError> {
    let cells = dir.join("cells");
    if !cells.is_dir() {
        return Err(HarnessError::Validation(format!(
            "{} is not a results directory (no cells/ inside)",
            dir.display()
        )));
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&cells)
        .map_err(|e| HarnessError::io(&cells, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("json"))
        .collect();
    paths.sort();
    let mut sets = Vec::with_capacity(paths.len());
    for path in paths {
        let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        let record: CellRecord = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))?;
        if record.schema_version != RESULTS_SCHEMA_VERSION {
            return Err(HarnessError::Validation(format!(
                "{}: schema {} (expected {})",
                path.display(),
                record.schema_version,
                RESULTS_SCHEMA_VERSION
            )));
        }
        record
            .measurement
            .validate()
            .map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))?;
        sets.push(record.measurement);
    }
    Ok(sets)
}
