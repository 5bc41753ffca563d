//! Shared plumbing: errors and exit codes, seed lists, config resolution,
//! dataset loading, output directories and manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ncagc::artifacts::{self, RunManifest, RunStatus};
use ncagc::config::{TrainConfig, PRESET_DATASETS};
use ncagc::error::Error;
use ncagc::graph::{load_dataset, resolve_dataset, Graph};
use ncagc::metrics::MetricReport;
use ncagc::train::{train, RunResult};
use serde::{Deserialize, Serialize};

use crate::{DataArgs, RunArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// `N` means seeds `0..N`; `a,b,c` is an explicit list; `a..b` is a range.
pub fn parse_seeds(spec: &str) -> CliResult<Vec<u64>> {
    let bad = || usage(format!("cannot parse seeds {spec:?}"));
    let spec = spec.trim();
    let seeds: Vec<u64> = if let Some((a, b)) = spec.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        (a..b).collect()
    } else if spec.contains(',') {
        spec.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<CliResult<_>>()?
    } else {
        let n: u64 = spec.parse().map_err(|_| bad())?;
        (0..n).collect()
    };
    if seeds.is_empty() {
        return Err(usage(format!("seed specification {spec:?} selects no seeds")));
    }
    Ok(seeds)
}

pub fn parse_list<T: std::str::FromStr>(spec: &str, what: &str) -> CliResult<Vec<T>> {
    let out: Vec<T> = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| usage(format!("invalid {what} {s:?}"))))
        .collect::<CliResult<_>>()?;
    if out.is_empty() {
        return Err(usage(format!("empty {what} list")));
    }
    Ok(out)
}

/// Preset (for known datasets) → config file → `--set` overrides → `--epochs`.
pub fn resolve_config(args: &RunArgs) -> CliResult<TrainConfig> {
    let mut cfg = match &args.data.dataset {
        Some(name) if PRESET_DATASETS.contains(&name.as_str()) => TrainConfig::preset(name, &args.preset)?,
        _ => TrainConfig::default(),
    };
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    if let Some(name) = &args.data.dataset {
        cfg.dataset = name.clone();
    }
    for kv in &args.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| usage(format!("override {kv:?} is not KEY=VALUE")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(t) = args.epochs {
        cfg.epochs = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn seeds_for(spec: Option<&str>, cfg: &TrainConfig) -> CliResult<Vec<u64>> {
    match spec {
        Some(s) => parse_seeds(s),
        None => Ok(vec![cfg.seed]),
    }
}

pub const TOY_DATASET: &str = "toy";

/// A small planted-partition graph for smoke runs; fixed regardless of seeds.
pub fn toy_graph() -> Graph {
    Graph::planted_partition(30, 3, 40, 0.2, 0.02, 0).expect("valid generator settings")
}

pub fn load_graph(data: &DataArgs, dataset: &str) -> CliResult<Graph> {
    if dataset == TOY_DATASET {
        return Ok(toy_graph());
    }
    let (path, format) = resolve_dataset(&data.data_dir, dataset)?;
    Ok(load_dataset(&path, format)?)
}

/// Creates `dir`, refusing a non-empty existing directory unless `overwrite`.
pub fn prepare_out_dir(dir: &Path, overwrite: bool) -> CliResult<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir)
            .map_err(|e| usage(format!("cannot read {}: {e}", dir.display())))?
            .next()
            .is_some();
        if non_empty && !overwrite {
            return Err(usage(format!(
                "output directory {} is not empty (pass --overwrite to reuse it)",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))
}

pub fn default_out(command: &str, dataset: &str) -> PathBuf {
    PathBuf::from("results").join(format!("{command}-{dataset}"))
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Invocation-level record, written before any work starts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub command: String,
    pub status: RunStatus,
    pub dataset: String,
    pub config: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub started_at: u64,
    pub finished_at: Option<u64>,
    pub code_version: String,
    pub error: Option<String>,
}

pub const EXPERIMENT_FILE: &str = "experiment.json";

impl ExperimentManifest {
    pub fn start(command: &str, cfg: &TrainConfig, seeds: &[u64], out_dir: &Path) -> CliResult<Self> {
        let m = ExperimentManifest {
            command: command.into(),
            status: RunStatus::Incomplete,
            dataset: cfg.dataset.clone(),
            config: cfg.to_text(),
            config_hash: cfg.hash(),
            seeds: seeds.to_vec(),
            out_dir: out_dir.to_path_buf(),
            started_at: unix_now(),
            finished_at: None,
            code_version: artifacts::CODE_VERSION.into(),
            error: None,
        };
        m.write()?;
        Ok(m)
    }

    fn write(&self) -> CliResult<()> {
        Ok(artifacts::write_json(&self.out_dir.join(EXPERIMENT_FILE), self)?)
    }

    /// Records the outcome and passes `result` through.
    pub fn finish<T>(mut self, result: CliResult<T>) -> CliResult<T> {
        self.finished_at = Some(unix_now());
        match &result {
            Ok(_) => self.status = RunStatus::Complete,
            Err(e) => {
                self.status = RunStatus::Failed;
                self.error = Some(e.to_string());
            }
        }
        self.write()?;
        result
    }
}

/// Summary line for one finished run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub metrics: Option<MetricReport>,
    pub wall_seconds: f64,
    pub dir: PathBuf,
}

/// Trains once per seed, each in `<dir>/seed-<s>` with its own manifest.
pub fn run_seeds(graph: &Graph, cfg: &TrainConfig, seeds: &[u64], dir: &Path, export: bool) -> CliResult<Vec<(RunSummary, RunResult)>> {
    let mut out = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let run_cfg = TrainConfig { seed, ..cfg.clone() };
        let run_dir = dir.join(format!("seed-{seed}"));
        fs::create_dir_all(&run_dir).map_err(|e| usage(format!("cannot create {}: {e}", run_dir.display())))?;
        let mut manifest = RunManifest::incomplete(&run_cfg);
        manifest.write(&run_dir)?;
        let result = match train(graph, &run_cfg) {
            Ok(r) => r,
            Err(e) => {
                manifest.status = RunStatus::Failed;
                manifest.error = Some(e.to_string());
                manifest.write(&run_dir)?;
                return Err(e.into());
            }
        };
        artifacts::write_run(&run_dir, &result, export)?;
        manifest.status = RunStatus::Complete;
        manifest.write(&run_dir)?;
        println!("{}", describe_run(&run_cfg.dataset, seed, result.metrics.as_ref(), result.wall_seconds));
        if let Some(e) = &result.final_error {
            eprintln!("warning: seed {seed}: final clustering failed: {e}");
        }
        out.push((
            RunSummary {
                seed,
                metrics: result.metrics,
                wall_seconds: result.wall_seconds,
                dir: run_dir,
            },
            result,
        ));
    }
    Ok(out)
}

pub fn describe_run(dataset: &str, seed: u64, m: Option<&MetricReport>, secs: f64) -> String {
    match m {
        Some(m) => format!(
            "{dataset} seed {seed}: ACC {:.4}  NMI {:.4}  ARI {:.4}  ({secs:.1} s)",
            m.acc, m.nmi, m.ari
        ),
        None => format!("{dataset} seed {seed}: no metrics ({secs:.1} s)"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_specs() {
        assert_eq!(parse_seeds("3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("4,1,9").unwrap(), vec![4, 1, 9]);
        assert_eq!(parse_seeds("7,").unwrap(), vec![7]);
        assert_eq!(parse_seeds("2..5").unwrap(), vec![2, 3, 4]);
        assert!(parse_seeds("0").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(usage("x").exit_code(), 2);
        assert_eq!(CliError::from(Error::Config("k".into())).exit_code(), 2);
        assert_eq!(CliError::from(Error::DegenerateCoefficients).exit_code(), 3);
    }
}
