//! Joint training of the autoencoder and self-expression matrix, evaluation
//! of checkpoints, ablation variants and the neighborhood-size sweep.

use std::cell::RefCell;
use std::time::Instant;

use log::{info, warn};
use ndarray::ArrayView2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::clustering::{build_affinity, spectral_clustering, AffinityConfig, AffinityMatrix, ClusterAssignment};
use crate::config::{CseMode, KnnSource, TrainConfig};
use crate::error::{Error, Result};
use crate::gnn::{GnnKind, Neighborhoods};
use crate::graph::{normalize_attributes, Graph};
use crate::knn::{knn_positive_mask, PositiveMask};
use crate::losses::LossBreakdown;
use crate::metrics::{evaluate_labels, MetricReport};
use crate::model::{objective, Model, ObjectiveSettings, Positives};
use crate::optim::Adam;
use crate::self_expression::SelfExpressionMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossBreakdown,
}

/// A monitoring evaluation taken during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub epoch: usize,
    pub metrics: Option<MetricReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: TrainConfig,
    /// Metrics of the final model; `None` without labels or if the final
    /// clustering failed (see `final_error`).
    pub metrics: Option<MetricReport>,
    pub assignment: Option<ClusterAssignment>,
    pub final_error: Option<String>,
    pub history: Vec<EpochRecord>,
    pub evaluations: Vec<EvalRecord>,
    pub wall_seconds: f64,
    pub checkpoint: Checkpoint,
}

/// Outcome of clustering one coefficient matrix.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub affinity: AffinityMatrix,
    pub assignment: ClusterAssignment,
    pub metrics: Option<MetricReport>,
}

/// Affinity construction and spectral clustering of a self-expression matrix.
/// Row `i` of the effective matrix holds the coefficients expressing node `i`,
/// so it is handed to the affinity builder as column `i`.
pub fn cluster_coefficients(
    c: &SelfExpressionMatrix,
    num_clusters: usize,
    affinity: &AffinityConfig,
    seed: u64,
) -> Result<(AffinityMatrix, ClusterAssignment)> {
    let eff = c.effective();
    let aff = build_affinity(eff.t(), num_clusters, affinity)?;
    let assignment = spectral_clustering(&aff, num_clusters, seed)?;
    Ok((aff, assignment))
}

fn evaluate_coefficients(
    c: &SelfExpressionMatrix,
    graph: &Graph,
    config: &TrainConfig,
) -> Result<Evaluation> {
    let (affinity, assignment) = cluster_coefficients(c, graph.num_clusters, &config.affinity, config.seed)?;
    let metrics = match &graph.labels {
        Some(truth) => Some(evaluate_labels(&assignment.labels, truth)?),
        None => None,
    };
    Ok(Evaluation {
        affinity,
        assignment,
        metrics,
    })
}

/// Clusters a trained checkpoint's coefficients without touching parameters.
pub fn evaluate(checkpoint: &Checkpoint, graph: &Graph) -> Result<Evaluation> {
    let c = checkpoint.self_expression()?;
    if c.num_nodes() != graph.num_nodes() {
        return Err(Error::Shape(format!(
            "checkpoint was trained on {} nodes but the graph has {}",
            c.num_nodes(),
            graph.num_nodes()
        )));
    }
    evaluate_coefficients(&c, graph, &checkpoint.config)
}

pub fn train(graph: &Graph, config: &TrainConfig) -> Result<RunResult> {
    config.validate()?;
    graph.validate()?;
    let start = Instant::now();
    let prepared = normalize_attributes(graph, config.normalization);
    let x = prepared.attributes.view();
    let nbrs = Neighborhoods::of_graph(&prepared);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Model::init(graph.num_nodes(), graph.num_features(), config, &mut rng)?;
    let mut optimizer = Adam::new(config.learning_rate);
    let settings = ObjectiveSettings::from_config(config);

    let static_mask = match (settings.nbr_active(), config.knn_source) {
        (true, KnnSource::Attributes) => Some(knn_positive_mask(x, config.neighborhood_size)?),
        _ => None,
    };
    let latent_mask: RefCell<Option<PositiveMask>> = RefCell::new(None);
    let refresh = |z: ArrayView2<f64>| -> Result<PositiveMask> {
        let mask = knn_positive_mask(z, config.neighborhood_size)?;
        *latent_mask.borrow_mut() = Some(mask.clone());
        Ok(mask)
    };

    let mut history = Vec::with_capacity(config.epochs);
    let mut evaluations = Vec::new();
    for epoch in 1..=config.epochs {
        let held: Option<PositiveMask>;
        let positives = if !settings.nbr_active() {
            None
        } else if let Some(m) = &static_mask {
            Some(Positives::Fixed(m))
        } else if (epoch - 1) % config.knn_refresh_every == 0 {
            Some(Positives::FromLatent(&refresh))
        } else {
            held = latent_mask.borrow().clone();
            Some(Positives::Fixed(held.as_ref().expect("refreshed on the first epoch")))
        };
        let out = objective(&model, x, &nbrs, positives, &settings, true).map_err(|e| e.at_epoch(epoch))?;
        let grads = out.grads.expect("gradients requested");
        optimizer.step(model.slices_mut(), grads.slices())?;
        if model.slices_mut().iter().any(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(Error::Numerical {
                component: "optimizer update".into(),
                epoch: Some(epoch),
            });
        }
        history.push(EpochRecord { epoch, loss: out.loss });

        if config.eval_every > 0 && epoch % config.eval_every == 0 && epoch != config.epochs {
            let record = match evaluate_coefficients(&model.self_expression, graph, config) {
                Ok(ev) => EvalRecord {
                    epoch,
                    metrics: ev.metrics,
                    error: None,
                },
                Err(e) => {
                    warn!("evaluation at epoch {epoch} failed: {e}");
                    EvalRecord {
                        epoch,
                        metrics: None,
                        error: Some(e.to_string()),
                    }
                }
            };
            if let Some(m) = &record.metrics {
                info!("epoch {epoch}: loss {:.6} acc {:.4} nmi {:.4} ari {:.4}", out.loss.total, m.acc, m.nmi, m.ari);
            }
            evaluations.push(record);
        }
    }

    let checkpoint = Checkpoint::from_model(&model, config, graph.num_clusters, config.epochs);
    let (metrics, assignment, final_error) = match evaluate_coefficients(&model.self_expression, graph, config) {
        Ok(ev) => (ev.metrics, Some(ev.assignment), None),
        Err(e) if e.is_numerical() => {
            warn!("final evaluation failed: {e}");
            (None, None, Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    evaluations.push(EvalRecord {
        epoch: config.epochs,
        metrics,
        error: final_error.clone(),
    });
    Ok(RunResult {
        config: config.clone(),
        metrics,
        assignment,
        final_error,
        history,
        evaluations,
        wall_seconds: start.elapsed().as_secs_f64(),
        checkpoint,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationVariant {
    Full,
    WoNbr,
    WoCse,
    WoAtt,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 4] = [
        AblationVariant::Full,
        AblationVariant::WoNbr,
        AblationVariant::WoCse,
        AblationVariant::WoAtt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationVariant::Full => "full",
            AblationVariant::WoNbr => "wo_nbr",
            AblationVariant::WoCse => "wo_cse",
            AblationVariant::WoAtt => "wo_att",
        }
    }

    /// The base configuration with this variant's component removed.
    pub fn apply(self, base: &TrainConfig) -> TrainConfig {
        let mut cfg = base.clone();
        match self {
            AblationVariant::Full => {}
            AblationVariant::WoNbr => cfg.nbr_enabled = false,
            AblationVariant::WoCse => cfg.cse_mode = CseMode::Plain,
            AblationVariant::WoAtt => cfg.gnn_kind = GnnKind::MeanAggregation,
        }
        cfg
    }
}

impl std::fmt::Display for AblationVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AblationVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        AblationVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation variant {s:?}")))
    }
}

pub fn run_ablation(graph: &Graph, base: &TrainConfig, variant: AblationVariant) -> Result<RunResult> {
    train(graph, &variant.apply(base))
}

/// One run per neighborhood size, all with `base.seed`.
pub fn sweep_neighborhood_size(graph: &Graph, base: &TrainConfig, k_values: &[usize]) -> Result<Vec<RunResult>> {
    if let Some(bad) = k_values.iter().find(|&&k| k == 0) {
        return Err(Error::Config(format!("neighborhood size must be at least 1, got {bad}")));
    }
    k_values
        .iter()
        .map(|&k| {
            let cfg = TrainConfig {
                neighborhood_size: k,
                ..base.clone()
            };
            train(graph, &cfg)
        })
        .collect()
}

/// Mean and population standard deviation of each metric over several runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub runs: usize,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub nmi_mean: f64,
    pub nmi_std: f64,
    pub ari_mean: f64,
    pub ari_std: f64,
}

pub fn summarize(reports: &[MetricReport]) -> Option<MetricSummary> {
    if reports.is_empty() {
        return None;
    }
    let n = reports.len() as f64;
    let stats = |f: fn(&MetricReport) -> f64| {
        let mean = reports.iter().map(f).sum::<f64>() / n;
        let var = reports.iter().map(|r| (f(r) - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    };
    let (acc_mean, acc_std) = stats(|r| r.acc);
    let (nmi_mean, nmi_std) = stats(|r| r.nmi);
    let (ari_mean, ari_std) = stats(|r| r.ari);
    Some(MetricSummary {
        runs: reports.len(),
        acc_mean,
        acc_std,
        nmi_mean,
        nmi_std,
        ari_mean,
        ari_std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LossWeights;
    use ndarray::Array2;

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            hidden_dims: vec![8, 4],
            neighborhood_size: 3,
            epochs: 5,
            learning_rate: 1e-2,
            weights: LossWeights::new(1.0, 1.0, 1.0),
            ..TrainConfig::default()
        }
    }

    fn toy() -> Graph {
        Graph::planted_partition(6, 2, 8, 0.8, 0.05, 5).unwrap()
    }

    #[test]
    fn single_epoch_on_five_nodes() {
        let g = Graph::from_edges(
            "five",
            Array2::from_shape_fn((5, 3), |(i, j)| ((i * 3 + j) % 4) as f64),
            &[(0, 1), (1, 2), (3, 4)],
            Some(vec![0, 0, 0, 1, 1]),
            2,
        )
        .unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            ..tiny_config()
        };
        let r = train(&g, &cfg).unwrap();
        assert_eq!(r.history.len(), 1);
        let l = r.history[0].loss;
        assert!([l.rec, l.nbr, l.cse, l.coef, l.total].iter().all(|v| v.is_finite()));
        assert!(r.metrics.is_some());
    }

    #[test]
    fn history_is_deterministic() {
        let g = toy();
        let a = train(&g, &tiny_config()).unwrap();
        let b = train(&g, &tiny_config()).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.checkpoint, b.checkpoint);
        assert_eq!(a.metrics, b.metrics);
    }

    #[test]
    fn zero_weight_equals_disabled_term() {
        let g = toy();
        let zero = TrainConfig {
            weights: LossWeights::new(0.0, 1.0, 1.0),
            ..tiny_config()
        };
        let disabled = TrainConfig {
            nbr_enabled: false,
            ..zero.clone()
        };
        let a = train(&g, &zero).unwrap();
        let b = train(&g, &disabled).unwrap();
        assert_eq!(a.history, b.history);
        let via_ablation = run_ablation(&g, &zero, AblationVariant::WoNbr).unwrap();
        assert_eq!(via_ablation.history, a.history);
    }

    #[test]
    fn total_is_weighted_sum_each_epoch() {
        let r = train(&toy(), &tiny_config()).unwrap();
        for rec in &r.history {
            let l = rec.loss;
            let w = l.weights;
            assert_eq!(l.total, l.rec + w.nbr * l.nbr + w.cse * l.cse + w.coef * l.coef);
        }
    }

    #[test]
    fn all_zero_weights_give_pure_autoencoder() {
        let cfg = TrainConfig {
            weights: LossWeights::new(0.0, 0.0, 0.0),
            ..tiny_config()
        };
        let r = train(&toy(), &cfg).unwrap();
        for rec in &r.history {
            assert_eq!((rec.loss.nbr, rec.loss.cse, rec.loss.coef), (0.0, 0.0, 0.0));
            assert_eq!(rec.loss.total, rec.loss.rec);
        }
    }

    #[test]
    fn evaluate_reproduces_final_metrics() {
        let g = toy();
        let r = train(&g, &tiny_config()).unwrap();
        let ev = evaluate(&r.checkpoint, &g).unwrap();
        assert_eq!(ev.metrics, r.metrics);
        assert_eq!(Some(ev.assignment), r.assignment);
    }

    #[test]
    fn block_coefficients_recover_labels() {
        let g = toy();
        let labels = g.labels.clone().unwrap();
        let n = g.num_nodes();
        let c = Array2::from_shape_fn((n, n), |(i, j)| if labels[i] == labels[j] { 0.2 } else { 0.0 });
        let mut ckpt = train(&g, &TrainConfig { epochs: 1, ..tiny_config() }).unwrap().checkpoint;
        ckpt.tensors.get_mut("self_expression").unwrap().data = c.iter().copied().collect();
        let ev = evaluate(&ckpt, &g).unwrap();
        assert_eq!(ev.metrics.unwrap().acc, 1.0);
    }

    #[test]
    fn mismatched_node_count_is_rejected() {
        let r = train(&toy(), &TrainConfig { epochs: 1, ..tiny_config() }).unwrap();
        let other = Graph::planted_partition(5, 2, 8, 0.8, 0.05, 1).unwrap();
        assert!(matches!(evaluate(&r.checkpoint, &other), Err(Error::Shape(_))));
    }

    #[test]
    fn refresh_schedule_and_attribute_source_run() {
        let g = toy();
        for cfg in [
            TrainConfig {
                knn_refresh_every: 2,
                ..tiny_config()
            },
            TrainConfig {
                knn_source: KnnSource::Attributes,
                ..tiny_config()
            },
        ] {
            let r = train(&g, &cfg).unwrap();
            assert_eq!(r.history.len(), cfg.epochs);
        }
    }

    #[test]
    fn ablation_variants_change_one_thing() {
        let base = tiny_config();
        assert_eq!(AblationVariant::Full.apply(&base), base);
        assert!(!AblationVariant::WoNbr.apply(&base).nbr_enabled);
        assert_eq!(AblationVariant::WoCse.apply(&base).cse_mode, CseMode::Plain);
        assert_eq!(AblationVariant::WoAtt.apply(&base).gnn_kind, GnnKind::MeanAggregation);
        assert_eq!("wo_att".parse::<AblationVariant>().unwrap(), AblationVariant::WoAtt);
        assert!("wo_xyz".parse::<AblationVariant>().is_err());
        for v in AblationVariant::ALL {
            let r = run_ablation(&toy(), &TrainConfig { epochs: 2, ..base.clone() }, v).unwrap();
            assert!(r.history.iter().all(|h| h.loss.total.is_finite()));
        }
    }

    #[test]
    fn sweep_runs_one_result_per_k() {
        let g = Graph::planted_partition(6, 2, 6, 0.8, 0.1, 2).unwrap();
        let base = TrainConfig { epochs: 2, ..tiny_config() };
        let rs = sweep_neighborhood_size(&g, &base, &[1, 3, 11]).unwrap();
        assert_eq!(rs.len(), 3);
        for (r, k) in rs.iter().zip([1, 3, 11]) {
            assert_eq!(r.config.neighborhood_size, k);
            let m = r.metrics.unwrap();
            assert!(m.acc.is_finite() && m.nmi.is_finite() && m.ari.is_finite());
        }
        assert_eq!(sweep_neighborhood_size(&g, &base, &[4]).unwrap().len(), 1);
        assert!(sweep_neighborhood_size(&g, &base, &[0]).is_err());
    }

    #[test]
    fn divergence_reports_epoch() {
        let cfg = TrainConfig {
            learning_rate: 1e300,
            epochs: 4,
            ..tiny_config()
        };
        match train(&toy(), &cfg) {
            Err(Error::Numerical { epoch: Some(e), .. }) => assert!(e >= 1),
            other => panic!("expected a numerical failure, got {:?}", other.map(|r| r.history.len())),
        }
    }

    #[test]
    fn summary_statistics() {
        let r = |acc| MetricReport { acc, nmi: 0.5, ari: 0.0, n: 4 };
        let s = summarize(&[r(0.5), r(1.0)]).unwrap();
        assert_eq!(s.acc_mean, 0.75);
        assert_eq!(s.acc_std, 0.25);
        assert_eq!(s.nmi_std, 0.0);
        assert!(summarize(&[]).is_none());
    }
}
