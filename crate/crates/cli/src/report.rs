//! Tables and charts from a results directory, plus the bundled published
//! numbers for side-by-side comparison.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use ncagc::artifacts::{read_history, read_json, MetricsFile, HISTORY_FILE, METRICS_FILE};
use serde::Deserialize;

use crate::commands::{ABLATION_CSV, BASELINE_CSV, K_SWEEP_CSV, LAMBDA_GRID_CSV};
use crate::plot::{heatmap, line_chart};
use crate::runs::{usage, CliResult};
use crate::ReportArgs;

/// Published clustering results shipped for comparison only.
pub const PUBLISHED_RESULTS: &str = include_str!("../data/published_table3.csv");

#[derive(Debug, Clone, Deserialize)]
pub struct PublishedRow {
    pub method: String,
    pub input: String,
    pub dataset: String,
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
    pub provenance: String,
}

pub fn published_rows() -> Vec<PublishedRow> {
    csv::Reader::from_reader(PUBLISHED_RESULTS.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .expect("bundled reference table parses")
}

struct RunRecord {
    rel: PathBuf,
    dir: PathBuf,
    metrics: MetricsFile,
}

/// Row of a summary CSV written by the experiment commands, keyed by header.
#[derive(Debug, Clone)]
struct SummaryRow {
    keys: BTreeMap<String, String>,
}

impl SummaryRow {
    fn num(&self, key: &str) -> Option<f64> {
        self.keys.get(key).and_then(|v| v.parse().ok())
    }
}

fn walk(dir: &Path, found: &mut Vec<PathBuf>) -> CliResult {
    let entries = fs::read_dir(dir).map_err(|e| usage(format!("cannot read {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for p in paths {
        if p.is_dir() {
            if p.file_name().is_some_and(|n| n == "report") {
                continue;
            }
            walk(&p, found)?;
        } else {
            found.push(p);
        }
    }
    Ok(())
}

fn read_rows(path: &Path) -> CliResult<Vec<SummaryRow>> {
    let err = |e: csv::Error| usage(format!("cannot read {}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(err)?;
    let headers = r.headers().map_err(err)?.clone();
    r.records()
        .map(|rec| {
            let rec = rec.map_err(err)?;
            Ok(SummaryRow {
                keys: headers.iter().map(String::from).zip(rec.iter().map(String::from)).collect(),
            })
        })
        .collect()
}

fn slug(rel: &Path) -> String {
    let s: String = rel
        .to_string_lossy()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "run".into()
    } else {
        s
    }
}

const METRICS: [(&str, &str); 3] = [("acc", "ACC"), ("nmi", "NMI"), ("ari", "ARI")];

fn csv_writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn write_row(w: &mut csv::Writer<fs::File>, row: &[String]) -> CliResult {
    w.write_record(row).map_err(|e| usage(format!("cannot write report table: {e}")))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

pub fn report(args: &ReportArgs) -> CliResult {
    let results = &args.results;
    if !results.is_dir() {
        return Err(usage(format!("{} is not a directory", results.display())));
    }
    let mut files = Vec::new();
    walk(results, &mut files)?;
    let named = |name: &str| -> Vec<PathBuf> {
        files
            .iter()
            .filter(|p| p.file_name().is_some_and(|n| n == name))
            .cloned()
            .collect()
    };

    let mut runs = Vec::new();
    for path in named(METRICS_FILE) {
        let dir = path.parent().expect("file has a parent").to_path_buf();
        // evaluate writes a bare metrics object; only full run records count here
        if let Ok(metrics) = read_json::<MetricsFile>(&path) {
            let rel = dir.strip_prefix(results).unwrap_or(&dir).to_path_buf();
            runs.push(RunRecord { rel, dir, metrics });
        }
    }
    let baselines = named(BASELINE_CSV);
    if runs.is_empty() && baselines.is_empty() {
        return Err(usage(format!("no run results found under {}", results.display())));
    }

    let out = args.out.clone().unwrap_or_else(|| results.join("report"));
    fs::create_dir_all(&out).map_err(|e| usage(format!("cannot create {}: {e}", out.display())))?;
    let mut written = Vec::new();

    // per-run table and loss curves
    if !runs.is_empty() {
        let path = out.join("runs.csv");
        let mut w = csv_writer(&path)?;
        write_row(&mut w, &["run", "dataset", "seed", "epochs", "wall_seconds", "acc", "nmi", "ari"].map(String::from))?;
        for r in &runs {
            let m = &r.metrics;
            write_row(
                &mut w,
                &[
                    r.rel.display().to_string(),
                    m.dataset.clone(),
                    m.seed.to_string(),
                    m.epochs.to_string(),
                    format!("{:.3}", m.wall_seconds),
                    fmt_opt(m.metrics.map(|x| x.acc)),
                    fmt_opt(m.metrics.map(|x| x.nmi)),
                    fmt_opt(m.metrics.map(|x| x.ari)),
                ],
            )?;
        }
        w.flush().map_err(|e| usage(e.to_string()))?;
        written.push(path);

        for r in &runs {
            let hist_path = r.dir.join(HISTORY_FILE);
            if !hist_path.exists() {
                continue;
            }
            let hist = read_history(&hist_path)?;
            let pts = |f: fn(&ncagc::artifacts::HistoryRow) -> f64| -> Vec<(f64, f64)> {
                hist.iter().map(|h| (h.epoch as f64, f(h))).collect()
            };
            let mut series = vec![("total".to_string(), pts(|h| h.total)), ("rec".to_string(), pts(|h| h.rec))];
            for (name, f) in [
                ("nbr", (|h: &ncagc::artifacts::HistoryRow| h.nbr) as fn(&_) -> f64),
                ("cse", |h| h.cse),
                ("coef", |h| h.coef),
            ] {
                if hist.iter().any(|h| f(h) != 0.0) {
                    series.push((name.to_string(), pts(f)));
                }
            }
            let path = out.join(format!("loss_{}.svg", slug(&r.rel)));
            line_chart(&path, &format!("Training loss: {}", r.rel.display()), "epoch", "loss", &series, false)?;
            written.push(path);
        }
    }

    // neighborhood-size sweeps: one chart per metric
    for path in named(K_SWEEP_CSV) {
        let rows = read_rows(&path)?;
        let rel = path.parent().and_then(|p| p.strip_prefix(results).ok()).unwrap_or(Path::new(""));
        for (key, label) in METRICS {
            let series: Vec<(f64, f64)> = rows
                .iter()
                .filter_map(|r| Some((r.num("k")?, r.num(&format!("{key}_mean"))?)))
                .collect();
            let target = out.join(format!("k_sweep_{}{key}.svg", prefix(rel)));
            line_chart(&target, &format!("{label} vs neighborhood size"), "K", label, &[(label.to_string(), series)], false)?;
            written.push(target);
        }
    }

    // loss-weight grids: heat map for two varied weights, line chart for one
    for path in named(LAMBDA_GRID_CSV) {
        let rows = read_rows(&path)?;
        let rel = path.parent().and_then(|p| p.strip_prefix(results).ok()).unwrap_or(Path::new(""));
        let varied: Vec<&str> = ["lambda1", "lambda2", "lambda3"]
            .into_iter()
            .filter(|axis| {
                rows.iter()
                    .filter_map(|r| r.keys.get(*axis).cloned())
                    .collect::<BTreeSet<_>>()
                    .len()
                    > 1
            })
            .collect();
        for (key, label) in METRICS {
            let col = format!("{key}_mean");
            let target = out.join(format!("lambda_grid_{}{key}.svg", prefix(rel)));
            match varied[..] {
                [axis] => {
                    let mut pts: Vec<(f64, f64)> = rows.iter().filter_map(|r| Some((r.num(axis)?, r.num(&col)?))).collect();
                    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                    let log_x = pts.iter().all(|p| p.0 > 0.0);
                    line_chart(&target, &format!("{label} vs {axis}"), axis, label, &[(label.to_string(), pts)], log_x)?;
                }
                [ax, ay] => {
                    let ticks = |axis: &str| -> Vec<f64> {
                        let mut v: Vec<f64> = rows.iter().filter_map(|r| r.num(axis)).collect();
                        v.sort_by(f64::total_cmp);
                        v.dedup();
                        v
                    };
                    let (xs, ys) = (ticks(ax), ticks(ay));
                    let mut grid = vec![vec![None; xs.len()]; ys.len()];
                    for r in &rows {
                        if let (Some(x), Some(y), Some(v)) = (r.num(ax), r.num(ay), r.num(&col)) {
                            let xi = xs.iter().position(|&t| t == x).expect("tick from rows");
                            let yi = ys.iter().position(|&t| t == y).expect("tick from rows");
                            grid[yi][xi] = Some(v);
                        }
                    }
                    let labels = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>();
                    heatmap(&target, &format!("{label} over {ax} and {ay}"), ax, &labels(&xs), ay, &labels(&ys), &grid)?;
                }
                _ => continue,
            }
            written.push(target);
        }
    }

    // measured summaries next to the published numbers for the same datasets
    let datasets: BTreeSet<String> = runs.iter().map(|r| r.metrics.dataset.clone()).collect();
    let path = out.join("comparison.csv");
    let mut w = csv_writer(&path)?;
    write_row(&mut w, &["dataset", "method", "input", "runs", "acc", "nmi", "ari", "provenance"].map(String::from))?;
    let mut groups: BTreeMap<(String, String), Vec<ncagc::metrics::MetricReport>> = BTreeMap::new();
    for r in &runs {
        if let Some(m) = r.metrics.metrics {
            let group = r.rel.parent().map(|p| p.display().to_string()).unwrap_or_default();
            groups.entry((r.metrics.dataset.clone(), group)).or_default().push(m);
        }
    }
    for ((dataset, group), reports) in &groups {
        let s = ncagc::train::summarize(reports).expect("non-empty group");
        let method = if group.is_empty() { "NCAGC".to_string() } else { format!("NCAGC [{group}]") };
        write_row(
            &mut w,
            &[
                dataset.clone(),
                method,
                "both".into(),
                s.runs.to_string(),
                format!("{:.4}", s.acc_mean),
                format!("{:.4}", s.nmi_mean),
                format!("{:.4}", s.ari_mean),
                "measured".into(),
            ],
        )?;
    }
    for path in &baselines {
        let rows = read_rows(path)?;
        let mut by_method: BTreeMap<String, Vec<&SummaryRow>> = BTreeMap::new();
        for r in &rows {
            by_method.entry(r.keys.get("method").cloned().unwrap_or_default()).or_default().push(r);
        }
        let dataset = baseline_dataset(path);
        for (method, rs) in by_method {
            let mean = |k: &str| rs.iter().filter_map(|r| r.num(k)).sum::<f64>() / rs.len() as f64;
            write_row(
                &mut w,
                &[
                    dataset.clone(),
                    method.clone(),
                    input_of(&method).into(),
                    rs.len().to_string(),
                    format!("{:.4}", mean("acc")),
                    format!("{:.4}", mean("nmi")),
                    format!("{:.4}", mean("ari")),
                    "measured".into(),
                ],
            )?;
        }
    }
    let all_datasets: BTreeSet<String> = datasets.into_iter().chain(baselines.iter().map(|p| baseline_dataset(p))).collect();
    for row in published_rows().into_iter().filter(|r| all_datasets.contains(&r.dataset)) {
        write_row(
            &mut w,
            &[
                row.dataset,
                row.method,
                row.input,
                String::new(),
                format!("{:.3}", row.acc),
                format!("{:.3}", row.nmi),
                format!("{:.3}", row.ari),
                row.provenance,
            ],
        )?;
    }
    w.flush().map_err(|e| usage(e.to_string()))?;
    written.push(path);

    for path in named(ABLATION_CSV) {
        let rel = path.parent().and_then(|p| p.strip_prefix(results).ok()).unwrap_or(Path::new(""));
        let target = out.join(format!("ablation_{}table.csv", prefix(rel)));
        fs::copy(&path, &target).map_err(|e| usage(format!("cannot copy {}: {e}", path.display())))?;
        written.push(target);
    }

    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn input_of(method: &str) -> &'static str {
    match method {
        "kmeans" => "feature",
        "spectral" => "graph",
        _ => "",
    }
}

fn prefix(rel: &Path) -> String {
    if rel.as_os_str().is_empty() {
        String::new()
    } else {
        format!("{}_", slug(rel))
    }
}

/// Dataset recorded in the experiment manifest next to a baseline table.
fn baseline_dataset(path: &Path) -> String {
    #[derive(Deserialize)]
    struct Partial {
        dataset: String,
    }
    path.parent()
        .and_then(|d| read_json::<Partial>(&d.join(crate::runs::EXPERIMENT_FILE)).ok())
        .map(|p| p.dataset)
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_reference_parses() {
        let rows = published_rows();
        assert_eq!(rows.len(), 68);
        let km = rows.iter().find(|r| r.method == "K-Means" && r.dataset == "cora").unwrap();
        assert_eq!((km.acc, km.nmi, km.ari), (0.492, 0.321, 0.230));
        assert!(rows.iter().all(|r| r.provenance == "published, not reproduced"));
    }

    #[test]
    fn slugs_are_file_safe() {
        assert_eq!(slug(Path::new("wo_cse/seed-3")), "wo_cse_seed-3");
        assert_eq!(slug(Path::new("")), "run");
    }
}
