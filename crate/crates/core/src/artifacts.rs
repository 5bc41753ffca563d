//! On-disk run artifacts: metrics JSON, loss-history CSV, cluster assignment
//! CSV, dense matrices as `.npy`, and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use ndarray_npy::write_npy;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterAssignment;
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::train::{EpochRecord, EvalRecord, RunResult};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const ASSIGNMENT_FILE: &str = "assignment.csv";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const COEFFICIENTS_FILE: &str = "coefficients.npy";
pub const AFFINITY_FILE: &str = "affinity.npy";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Incomplete,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub status: RunStatus,
    pub dataset: String,
    pub seed: u64,
    pub config_hash: String,
    pub code_version: String,
    pub config: String,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn incomplete(config: &crate::config::TrainConfig) -> RunManifest {
        RunManifest {
            status: RunStatus::Incomplete,
            dataset: config.dataset.clone(),
            seed: config.seed,
            config_hash: config.hash(),
            code_version: CODE_VERSION.to_string(),
            config: config.to_text(),
            error: None,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }

    pub fn read(dir: &Path) -> Result<RunManifest> {
        read_json(&dir.join(MANIFEST_FILE))
    }
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub dataset: String,
    pub seed: u64,
    pub epochs: usize,
    pub wall_seconds: f64,
    pub metrics: Option<MetricReport>,
    pub final_error: Option<String>,
    pub evaluations: Vec<EvalRecord>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Serde(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Serde(format!("{}: {e}", path.display()))
}

pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["epoch", "rec", "nbr", "cse", "coef", "total"])
        .map_err(|e| csv_error(path, e))?;
    for r in history {
        let l = r.loss;
        w.write_record([
            r.epoch.to_string(),
            l.rec.to_string(),
            l.nbr.to_string(),
            l.cse.to_string(),
            l.coef.to_string(),
            l.total.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row of a history CSV, as read back for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub rec: f64,
    pub nbr: f64,
    pub cse: f64,
    pub coef: f64,
    pub total: f64,
}

pub fn read_history(path: &Path) -> Result<Vec<HistoryRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

pub fn write_assignment(path: &Path, assignment: &ClusterAssignment) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["node_id", "label"]).map_err(|e| csv_error(path, e))?;
    for (i, l) in assignment.labels.iter().enumerate() {
        w.write_record([i.to_string(), l.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    write_npy(path, m).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))
}

/// Writes every artifact of a finished run into `dir` (which must exist) and
/// returns the checkpoint path. The manifest is not touched.
pub fn write_run(dir: &Path, result: &RunResult, export_matrices: bool) -> Result<PathBuf> {
    let ckpt_path = dir.join(CHECKPOINT_FILE);
    result.checkpoint.save(&ckpt_path)?;
    write_history(&dir.join(HISTORY_FILE), &result.history)?;
    if let Some(a) = &result.assignment {
        write_assignment(&dir.join(ASSIGNMENT_FILE), a)?;
    }
    write_json(
        &dir.join(METRICS_FILE),
        &MetricsFile {
            dataset: result.config.dataset.clone(),
            seed: result.config.seed,
            epochs: result.history.len(),
            wall_seconds: result.wall_seconds,
            metrics: result.metrics,
            final_error: result.final_error.clone(),
            evaluations: result.evaluations.clone(),
        },
    )?;
    if export_matrices {
        let c = result.checkpoint.self_expression()?;
        write_matrix(&dir.join(COEFFICIENTS_FILE), &c.effective())?;
        if let Ok((aff, _)) = crate::train::cluster_coefficients(
            &c,
            result.checkpoint.num_clusters,
            &result.config.affinity,
            result.config.seed,
        ) {
            write_matrix(&dir.join(AFFINITY_FILE), &aff.values)?;
        }
    }
    Ok(ckpt_path)
}
