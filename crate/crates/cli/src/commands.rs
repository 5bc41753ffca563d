use std::path::Path;

use ncagc::artifacts::{self, write_json};
use ncagc::checkpoint::Checkpoint;
use ncagc::clustering::{kmeans, spectral_baseline, SPECTRAL_KMEANS_RESTARTS};
use ncagc::config::TrainConfig;
use ncagc::metrics::{evaluate_labels, MetricReport};
use ncagc::train::{evaluate as evaluate_checkpoint, summarize, AblationVariant, MetricSummary};
use serde::Serialize;

use crate::runs::{
    default_out, describe_run, load_graph, parse_list, prepare_out_dir, resolve_config, run_seeds,
    seeds_for, usage, CliResult, ExperimentManifest, RunSummary,
};
use crate::{AblateArgs, BaselineArgs, EvaluateArgs, RunArgs, SweepArgs};

pub const SUMMARY_FILE: &str = "summary.json";
pub const ABLATION_CSV: &str = "ablation.csv";
pub const ABLATION_TXT: &str = "ablation.txt";
pub const K_SWEEP_CSV: &str = "k_sweep.csv";
pub const LAMBDA_GRID_CSV: &str = "lambda_grid.csv";
pub const BASELINE_CSV: &str = "baselines.csv";

#[derive(Debug, Serialize)]
struct SeedSummary<'a> {
    dataset: &'a str,
    runs: &'a [RunSummary],
    summary: Option<MetricSummary>,
}

fn reports(runs: &[RunSummary]) -> Vec<MetricReport> {
    runs.iter().filter_map(|r| r.metrics).collect()
}

fn print_summary(label: &str, s: Option<&MetricSummary>) {
    if let Some(s) = s {
        println!(
            "{label}: ACC {:.4} ± {:.4}  NMI {:.4} ± {:.4}  ARI {:.4} ± {:.4}  over {} runs",
            s.acc_mean, s.acc_std, s.nmi_mean, s.nmi_std, s.ari_mean, s.ari_std, s.runs
        );
    }
}

/// Trains every seed under `dir`, writes `summary.json`, returns the summary.
fn seeds_with_summary(
    graph: &ncagc::graph::Graph,
    cfg: &TrainConfig,
    seeds: &[u64],
    dir: &Path,
    export: bool,
) -> CliResult<Option<MetricSummary>> {
    let runs: Vec<RunSummary> = run_seeds(graph, cfg, seeds, dir, export)?
        .into_iter()
        .map(|(s, _)| s)
        .collect();
    let summary = summarize(&reports(&runs));
    write_json(
        &dir.join(SUMMARY_FILE),
        &SeedSummary {
            dataset: &cfg.dataset,
            runs: &runs,
            summary,
        },
    )?;
    Ok(summary)
}

fn setup(args: &RunArgs, command: &str) -> CliResult<(TrainConfig, Vec<u64>, std::path::PathBuf)> {
    let cfg = resolve_config(args)?;
    let seeds = seeds_for(args.seeds.as_deref(), &cfg)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| default_out(command, &cfg.dataset));
    prepare_out_dir(&out, args.overwrite)?;
    Ok((cfg, seeds, out))
}

pub fn train(args: &RunArgs) -> CliResult {
    let (cfg, seeds, out) = setup(args, "train")?;
    let manifest = ExperimentManifest::start("train", &cfg, &seeds, &out)?;
    let result = (|| {
        let graph = load_graph(&args.data, &cfg.dataset)?;
        let summary = seeds_with_summary(&graph, &cfg, &seeds, &out, args.export_matrices)?;
        print_summary(&cfg.dataset, summary.as_ref());
        Ok(())
    })();
    manifest.finish(result)
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let dataset = args.data.dataset.clone().unwrap_or_else(|| ckpt.config.dataset.clone());
    let graph = load_graph(&args.data, &dataset)?;
    let ev = evaluate_checkpoint(&ckpt, &graph)?;
    println!("{}", describe_run(&dataset, ckpt.config.seed, ev.metrics.as_ref(), 0.0));
    if let Some(out) = &args.out {
        prepare_out_dir(out, args.overwrite)?;
        let manifest = ExperimentManifest::start("evaluate", &ckpt.config, &[ckpt.config.seed], out)?;
        let result = (|| {
            artifacts::write_assignment(&out.join(artifacts::ASSIGNMENT_FILE), &ev.assignment)?;
            write_json(&out.join(artifacts::METRICS_FILE), &ev.metrics)?;
            Ok(())
        })();
        manifest.finish(result)?;
    }
    Ok(())
}

fn summary_header(keys: &[&str]) -> Vec<String> {
    keys.iter()
        .map(|s| s.to_string())
        .chain(
            ["runs", "acc_mean", "acc_std", "nmi_mean", "nmi_std", "ari_mean", "ari_std"]
                .iter()
                .map(|s| s.to_string()),
        )
        .collect()
}

fn summary_cells(s: Option<&MetricSummary>) -> Vec<String> {
    match s {
        Some(s) => [s.acc_mean, s.acc_std, s.nmi_mean, s.nmi_std, s.ari_mean, s.ari_std]
            .iter()
            .fold(vec![s.runs.to_string()], |mut v, x| {
                v.push(format!("{x:.6}"));
                v
            }),
        None => std::iter::once("0".to_string())
            .chain(std::iter::repeat(String::new()).take(6))
            .collect(),
    }
}

fn write_summary_csv(path: &Path, keys: &[&str], rows: &[(Vec<String>, Option<MetricSummary>)]) -> CliResult {
    let csv_err = |e: csv::Error| usage(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(summary_header(keys)).map_err(csv_err)?;
    for (key, s) in rows {
        let mut rec = key.clone();
        rec.extend(summary_cells(s.as_ref()));
        w.write_record(rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

/// Rows as in the published ablation table: ablations first, full model last.
fn ablation_text(rows: &[(AblationVariant, Option<MetricSummary>)]) -> String {
    let mut s = format!("{:<16}{:>10}{:>10}{:>10}\n", "Strategy", "ACC", "NMI", "ARI");
    for (v, m) in rows {
        let label = match v {
            AblationVariant::Full => "NCAGC".to_string(),
            other => format!("NCAGC w/o {}", other.name().trim_start_matches("wo_").to_uppercase()),
        };
        match m {
            Some(m) => s += &format!("{label:<16}{:>10.3}{:>10.3}{:>10.3}\n", m.acc_mean, m.nmi_mean, m.ari_mean),
            None => s += &format!("{label:<16}{:>10}{:>10}{:>10}\n", "-", "-", "-"),
        }
    }
    s
}

pub fn ablate(args: &AblateArgs) -> CliResult {
    let mut variants: Vec<AblationVariant> = Vec::new();
    for v in parse_list::<AblationVariant>(&args.variants, "ablation variant")? {
        if !variants.contains(&v) {
            variants.push(v);
        }
    }
    variants.sort_by_key(|v| *v == AblationVariant::Full);
    let (cfg, seeds, out) = setup(&args.run, "ablate")?;
    let manifest = ExperimentManifest::start("ablate", &cfg, &seeds, &out)?;
    let result = (|| {
        let graph = load_graph(&args.run.data, &cfg.dataset)?;
        let mut rows = Vec::new();
        for v in &variants {
            let dir = out.join(v.name());
            let summary = seeds_with_summary(&graph, &v.apply(&cfg), &seeds, &dir, args.run.export_matrices)?;
            print_summary(v.name(), summary.as_ref());
            rows.push((*v, summary));
        }
        let csv_rows: Vec<_> = rows.iter().map(|(v, s)| (vec![v.name().to_string()], *s)).collect();
        write_summary_csv(&out.join(ABLATION_CSV), &["variant"], &csv_rows)?;
        let text = ablation_text(&rows);
        std::fs::write(out.join(ABLATION_TXT), &text)
            .map_err(|e| usage(format!("cannot write ablation table: {e}")))?;
        print!("{text}");
        Ok(())
    })();
    manifest.finish(result)
}

/// Parses `name=v1,v2;name=v3` into axes of a Cartesian grid.
fn parse_lambda_grid(spec: &str) -> CliResult<Vec<(String, Vec<f64>)>> {
    let mut axes: Vec<(String, Vec<f64>)> = Vec::new();
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, values) = part
            .split_once('=')
            .ok_or_else(|| usage(format!("grid axis {part:?} is not name=v1,v2,...")))?;
        let name = name.trim().to_string();
        if !matches!(name.as_str(), "lambda1" | "lambda2" | "lambda3") {
            return Err(usage(format!("grid axis must be lambda1, lambda2 or lambda3, got {name:?}")));
        }
        if axes.iter().any(|(n, _)| *n == name) {
            return Err(usage(format!("grid axis {name} given twice")));
        }
        axes.push((name, parse_list(values, "loss weight")?));
    }
    if axes.is_empty() {
        return Err(usage("empty loss-weight grid"));
    }
    Ok(axes)
}

fn grid_points(axes: &[(String, Vec<f64>)]) -> Vec<Vec<(String, f64)>> {
    axes.iter().fold(vec![Vec::new()], |acc, (name, values)| {
        acc.into_iter()
            .flat_map(|point| {
                values.iter().map(move |&v| {
                    let mut p = point.clone();
                    p.push((name.clone(), v));
                    p
                })
            })
            .collect()
    })
}

pub fn sweep(args: &SweepArgs) -> CliResult {
    if args.k_sweep.is_none() && args.lambda_grid.is_none() {
        return Err(usage("sweep needs --k-sweep or --lambda-grid"));
    }
    let ks: Option<Vec<usize>> = args.k_sweep.as_deref().map(|s| parse_list(s, "neighborhood size")).transpose()?;
    if ks.as_ref().is_some_and(|ks| ks.contains(&0)) {
        return Err(usage("neighborhood sizes must be at least 1"));
    }
    let grid = args.lambda_grid.as_deref().map(parse_lambda_grid).transpose()?;
    let (cfg, seeds, out) = setup(&args.run, "sweep")?;
    let manifest = ExperimentManifest::start("sweep", &cfg, &seeds, &out)?;
    let result = (|| {
        let graph = load_graph(&args.run.data, &cfg.dataset)?;
        if let Some(ks) = &ks {
            let mut rows = Vec::new();
            for &k in ks {
                let point = TrainConfig {
                    neighborhood_size: k,
                    ..cfg.clone()
                };
                let summary = seeds_with_summary(&graph, &point, &seeds, &out.join(format!("k-{k}")), args.run.export_matrices)?;
                print_summary(&format!("K = {k}"), summary.as_ref());
                rows.push((vec![k.to_string()], summary));
            }
            write_summary_csv(&out.join(K_SWEEP_CSV), &["k"], &rows)?;
        }
        if let Some(axes) = &grid {
            let mut rows = Vec::new();
            for point in grid_points(axes) {
                let mut pcfg = cfg.clone();
                let mut name = Vec::new();
                for (axis, v) in &point {
                    pcfg.set(axis, &v.to_string())?;
                    name.push(format!("{axis}-{v}"));
                }
                pcfg.validate()?;
                let label = name.join("_");
                let summary = seeds_with_summary(&graph, &pcfg, &seeds, &out.join(&label), args.run.export_matrices)?;
                print_summary(&label, summary.as_ref());
                let w = pcfg.weights;
                rows.push((vec![w.nbr.to_string(), w.cse.to_string(), w.coef.to_string()], summary));
            }
            write_summary_csv(&out.join(LAMBDA_GRID_CSV), &["lambda1", "lambda2", "lambda3"], &rows)?;
        }
        Ok(())
    })();
    manifest.finish(result)
}

pub fn baseline(args: &BaselineArgs) -> CliResult {
    let methods: Vec<&str> = match args.method.as_str() {
        "all" => vec!["kmeans", "spectral"],
        "kmeans" => vec!["kmeans"],
        "spectral" => vec!["spectral"],
        other => return Err(usage(format!("unknown baseline method {other:?} (kmeans, spectral, all)"))),
    };
    let dataset = args
        .data
        .dataset
        .clone()
        .ok_or_else(|| usage("baseline needs --dataset"))?;
    let cfg = TrainConfig {
        dataset: dataset.clone(),
        ..TrainConfig::default()
    };
    let seeds = seeds_for(args.seeds.as_deref(), &cfg)?;
    let out = args.out.clone().unwrap_or_else(|| default_out("baseline", &dataset));
    prepare_out_dir(&out, args.overwrite)?;
    let manifest = ExperimentManifest::start("baseline", &cfg, &seeds, &out)?;
    let result = (|| {
        let graph = load_graph(&args.data, &dataset)?;
        let k = args.clusters.unwrap_or(graph.num_clusters);
        let truth = graph
            .labels
            .as_ref()
            .ok_or_else(|| usage(format!("dataset {dataset} has no labels to score against")))?;
        let path = out.join(BASELINE_CSV);
        let csv_err = |e: csv::Error| usage(format!("cannot write {}: {e}", path.display()));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(["method", "seed", "acc", "nmi", "ari"]).map_err(csv_err)?;
        for method in methods {
            let mut reports = Vec::new();
            for &seed in &seeds {
                let assignment = match method {
                    "kmeans" => kmeans(graph.attributes.view(), k, seed, SPECTRAL_KMEANS_RESTARTS)?,
                    _ => spectral_baseline(&graph.adjacency, k, seed)?,
                };
                let m = evaluate_labels(&assignment.labels, truth)?;
                w.write_record([
                    method.to_string(),
                    seed.to_string(),
                    format!("{:.6}", m.acc),
                    format!("{:.6}", m.nmi),
                    format!("{:.6}", m.ari),
                ])
                .map_err(csv_err)?;
                reports.push(m);
            }
            print_summary(&format!("{dataset} {method}"), summarize(&reports).as_ref());
        }
        w.flush().map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    })();
    manifest.finish(result)
}
