use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn ncagc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncagc"))
        .args(args)
        .env_remove("NCAGC_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn text(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn train_toy_single_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let start = Instant::now();
    let res = ncagc(&["train", "--dataset", "toy", "--epochs", "1", "--out", p(&out)]);
    assert!(start.elapsed() < Duration::from_secs(10));
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("ACC"), "{stdout}");
    let seed_dir = out.join("seed-0");
    for f in ["manifest.json", "metrics.json", "history.csv", "assignment.csv", "model.ckpt"] {
        assert!(seed_dir.join(f).exists(), "missing {f}");
    }
    assert_eq!(text(&seed_dir.join("history.csv")).lines().count(), 2);
    assert!(text(&seed_dir.join("manifest.json")).contains("\"complete\""));
    assert!(text(&out.join("experiment.json")).contains("\"complete\""));
    assert!(text(&out.join("summary.json")).contains("acc_mean"));
}

#[test]
fn multi_seed_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let res = ncagc(&["train", "--dataset", "toy", "--epochs", "3", "--seeds", "2", "--out", p(out)]);
        assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    }
    for seed in ["seed-0", "seed-1"] {
        assert_eq!(text(&a.join(seed).join("history.csv")), text(&b.join(seed).join("history.csv")));
        assert_eq!(text(&a.join(seed).join("assignment.csv")), text(&b.join(seed).join("assignment.csv")));
    }
    assert_ne!(text(&a.join("seed-0/history.csv")), text(&a.join("seed-1/history.csv")));
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "dataset = toy\nk = 0\n").unwrap();
    let res = ncagc(&["train", "--config", p(&cfg), "--out", p(&dir.path().join("o"))]);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("neighborhood_size"));

    let res = ncagc(&["train", "--dataset", "toy", "--set", "gnn=lstm", "--out", p(&dir.path().join("o2"))]);
    assert_eq!(code(&res), 2);
}

#[test]
fn missing_dataset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let res = ncagc(&[
        "train", "--dataset", "cora", "--data-dir", p(dir.path()), "--epochs", "1", "--out", p(&dir.path().join("o")),
    ]);
    assert_eq!(code(&res), 2);
    // the invocation manifest was written first and records the failure
    assert!(text(&dir.path().join("o/experiment.json")).contains("\"failed\""));
}

#[test]
fn divergence_exits_3_and_marks_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let res = ncagc(&["train", "--dataset", "toy", "--epochs", "5", "--set", "lr=1e300", "--out", p(&out)]);
    assert_eq!(code(&res), 3, "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stderr).contains("epoch"));
    assert!(text(&out.join("seed-0/manifest.json")).contains("\"failed\""));
}

#[test]
fn output_directory_is_not_reused_without_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let args = ["train", "--dataset", "toy", "--epochs", "1", "--out", p(&out)];
    assert_eq!(code(&ncagc(&args)), 0);
    assert_eq!(code(&ncagc(&args)), 2);
    let mut again = args.to_vec();
    again.push("--overwrite");
    assert_eq!(code(&ncagc(&again)), 0);
}

#[test]
fn evaluate_reproduces_training_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(code(&ncagc(&["train", "--dataset", "toy", "--epochs", "4", "--out", p(&out)])), 0);
    let ckpt = out.join("seed-0/model.ckpt");
    let eval_out = dir.path().join("eval");
    let res = ncagc(&["evaluate", "--checkpoint", p(&ckpt), "--out", p(&eval_out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(text(&eval_out.join("assignment.csv")), text(&out.join("seed-0/assignment.csv")));

    let res = ncagc(&["evaluate", "--checkpoint", p(&out.join("seed-0/history.csv"))]);
    assert_eq!(code(&res), 2);
}

#[test]
fn ablation_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let res = ncagc(&["ablate", "--dataset", "toy", "--epochs", "2", "--out", p(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let table = text(&out.join("ablation.txt"));
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[4].starts_with("NCAGC "));
    assert_eq!(text(&out.join("ablation.csv")).lines().count(), 5);

    let single = dir.path().join("single");
    assert_eq!(code(&ncagc(&["ablate", "--dataset", "toy", "--epochs", "1", "--variants", "full", "--out", p(&single)])), 0);
    assert_eq!(text(&single.join("ablation.txt")).lines().count(), 2);

    let bad = ncagc(&["ablate", "--dataset", "toy", "--variants", "full,wo_magic", "--out", p(&dir.path().join("b"))]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn baselines() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let res = ncagc(&["baseline", "--dataset", "toy", "--seeds", "2", "--out", p(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(text(&out.join("baselines.csv")).lines().count(), 5);
    let res = ncagc(&["baseline", "--dataset", "toy", "--method", "kmeans", "--clusters", "1000", "--out", p(&dir.path().join("k"))]);
    assert_eq!(code(&res), 2);
    let res = ncagc(&["baseline", "--dataset", "toy", "--method", "dbscan", "--out", p(&dir.path().join("d"))]);
    assert_eq!(code(&res), 2);
}

#[test]
fn sweeps_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let ks = dir.path().join("ks");
    let res = ncagc(&["sweep", "--dataset", "toy", "--epochs", "2", "--k-sweep", "3,10", "--out", p(&ks)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(text(&ks.join("k_sweep.csv")).lines().count(), 3);
    let res = ncagc(&["report", "--results", p(&ks)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    for m in ["acc", "nmi", "ari"] {
        assert!(ks.join(format!("report/k_sweep_{m}.svg")).exists());
    }
    assert!(ks.join("report/loss_k-3_seed-0.svg").exists());
    let comparison = text(&ks.join("report/comparison.csv"));
    assert!(comparison.contains("measured"));

    let grid = dir.path().join("grid");
    let res = ncagc(&["sweep", "--dataset", "toy", "--epochs", "1", "--lambda-grid", "lambda1=1,10;lambda2=0.1,1", "--out", p(&grid)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(text(&grid.join("lambda_grid.csv")).lines().count(), 5);
    assert_eq!(code(&ncagc(&["report", "--results", p(&grid)])), 0);
    for m in ["acc", "nmi", "ari"] {
        let svg = text(&grid.join(format!("report/lambda_grid_{m}.svg")));
        assert!(svg.contains("<svg") && svg.contains("<rect"));
    }

    let res = ncagc(&["sweep", "--dataset", "toy", "--out", p(&dir.path().join("none"))]);
    assert_eq!(code(&res), 2);
}

#[test]
fn report_on_empty_directory_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&ncagc(&["report", "--results", p(dir.path())])), 2);
}

#[test]
fn report_includes_published_reference_for_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(code(&ncagc(&["baseline", "--dataset", "toy", "--out", p(&out)])), 0);
    assert_eq!(code(&ncagc(&["report", "--results", p(&out)])), 0);
    let comparison = text(&out.join("report/comparison.csv"));
    assert!(comparison.contains("toy,kmeans,feature"));
    // no published numbers exist for the synthetic graph
    assert!(!comparison.contains("published"));
}
