//! Training configuration, per-dataset presets and the flat `key = value`
//! config-file format.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clustering::AffinityConfig;
use crate::error::{Error, Result};
use crate::gnn::{Activation, GnnKind};
use crate::graph::NormalizeMode;
use crate::losses::{ContrastOptions, LossWeights};
use crate::self_expression::CoefNorm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KnnSource {
    #[default]
    Latent,
    Attributes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CseMode {
    #[default]
    Contrastive,
    /// Squared reconstruction error of the self-expressed latents.
    Plain,
}

macro_rules! simple_enum_text {
    ($ty:ty, $($variant:path => $text:literal),+ $(,)?) => {
        impl std::fmt::Display for $ty {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(match self { $($variant => $text),+ })
            }
        }
        impl std::str::FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($ty), " {:?}"), other
                    ))),
                }
            }
        }
    };
}

simple_enum_text!(KnnSource, KnnSource::Latent => "latent", KnnSource::Attributes => "attributes");
simple_enum_text!(CseMode, CseMode::Contrastive => "contrastive", CseMode::Plain => "plain");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dataset: String,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Encoder layer widths after the input layer, e.g. `[1024, 512]`.
    pub hidden_dims: Vec<usize>,
    pub gnn_kind: GnnKind,
    pub activation: Activation,
    pub neighborhood_size: usize,
    pub weights: LossWeights,
    pub knn_source: KnnSource,
    pub knn_refresh_every: usize,
    pub affinity: AffinityConfig,
    pub cse_mode: CseMode,
    pub nbr_enabled: bool,
    pub seed: u64,
    /// Monitoring evaluation period in epochs; 0 evaluates only at the end.
    pub eval_every: usize,
    pub normalization: NormalizeMode,
    pub coef_norm: CoefNorm,
    pub contrast: ContrastOptions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dataset: "toy".into(),
            learning_rate: 1e-3,
            epochs: 50,
            hidden_dims: vec![32, 16],
            gnn_kind: GnnKind::Attention,
            activation: Activation::Prelu,
            neighborhood_size: 10,
            weights: LossWeights::new(10.0, 10.0, 10.0),
            knn_source: KnnSource::Latent,
            knn_refresh_every: 1,
            affinity: AffinityConfig::default(),
            cse_mode: CseMode::Contrastive,
            nbr_enabled: true,
            seed: 0,
            eval_every: 0,
            normalization: NormalizeMode::RowL1,
            coef_norm: CoefNorm::SquaredFrobenius,
            contrast: ContrastOptions::default(),
        }
    }
}

/// Names accepted by [`TrainConfig::preset`].
pub const PRESET_DATASETS: &[&str] = &["cora", "citeseer", "wiki", "acm"];

impl TrainConfig {
    /// Published per-dataset settings. `variant` is `"table2"` (the default)
    /// or `"prose"`, which differs only for Citeseer's trade-off weights.
    pub fn preset(dataset: &str, variant: &str) -> Result<TrainConfig> {
        if !matches!(variant, "table2" | "prose") {
            return Err(Error::Config(format!("unknown preset {variant:?}")));
        }
        let base = TrainConfig {
            dataset: dataset.to_string(),
            ..TrainConfig::default()
        };
        let (lr, epochs, dims, weights, normalization) = match dataset {
            "cora" => (1e-4, 400, vec![1024, 512], (10.0, 10.0, 10.0), NormalizeMode::RowL1),
            "citeseer" => {
                let w = if variant == "prose" {
                    (10.0, 1.0, 1.0)
                } else {
                    (100.0, 1.0, 1.0)
                };
                (1e-4, 200, vec![1024, 1024], w, NormalizeMode::RowL1)
            }
            "wiki" => (1e-4, 300, vec![1024, 512], (10.0, 1.0, 10.0), NormalizeMode::None),
            "acm" => (5e-4, 200, vec![1024, 512], (100.0, 200.0, 3500.0), NormalizeMode::RowL1),
            other => {
                return Err(Error::Config(format!(
                    "no preset for dataset {other:?} (known: {})",
                    PRESET_DATASETS.join(", ")
                )))
            }
        };
        Ok(TrainConfig {
            learning_rate: lr,
            epochs,
            hidden_dims: dims,
            neighborhood_size: 10,
            weights: LossWeights::new(weights.0, weights.1, weights.2),
            normalization,
            ..base
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.neighborhood_size == 0 {
            return fail("neighborhood_size K must be at least 1".into());
        }
        if self.knn_refresh_every == 0 {
            return fail("knn_refresh_every must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        for (name, w) in [
            ("lambda1", self.weights.nbr),
            ("lambda2", self.weights.cse),
            ("lambda3", self.weights.coef),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return fail(format!("{name} must be a finite nonnegative number, got {w}"));
            }
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return fail(format!("encoder dims must be positive, got {:?}", self.hidden_dims));
        }
        if !(self.contrast.temperature > 0.0 && self.contrast.temperature.is_finite()) {
            return fail(format!("temperature must be positive, got {}", self.contrast.temperature));
        }
        self.affinity.validate()
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
        }
        fn flag(key: &str, value: &str) -> Result<bool> {
            match value {
                "true" | "yes" | "1" | "on" => Ok(true),
                "false" | "no" | "0" | "off" => Ok(false),
                _ => Err(Error::Config(format!("{key}: expected a boolean, got {value:?}"))),
            }
        }
        match key {
            "dataset" => self.dataset = value.to_string(),
            "learning_rate" | "lr" => self.learning_rate = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "hidden_dims" | "encoder_dims" => {
                self.hidden_dims = value
                    .split(|c: char| c == ',' || c == '-' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| num(key, s))
                    .collect::<Result<_>>()?
            }
            "gnn_kind" | "gnn" => self.gnn_kind = value.parse()?,
            "activation" => self.activation = value.parse()?,
            "neighborhood_size" | "k" => self.neighborhood_size = num(key, value)?,
            "lambda1" => self.weights.nbr = num(key, value)?,
            "lambda2" => self.weights.cse = num(key, value)?,
            "lambda3" => self.weights.coef = num(key, value)?,
            "knn_source" => self.knn_source = value.parse()?,
            "knn_refresh_every" => self.knn_refresh_every = num(key, value)?,
            "energy_fraction" => self.affinity.energy_fraction = num(key, value)?,
            "rank_multiplier" => self.affinity.rank_multiplier = num(key, value)?,
            "smoothing" => self.affinity.smoothing = flag(key, value)?,
            "affinity_power" => self.affinity.power = num(key, value)?,
            "cse_mode" => self.cse_mode = value.parse()?,
            "nbr_enabled" => self.nbr_enabled = flag(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "eval_every" => self.eval_every = num(key, value)?,
            "normalization" => self.normalization = value.parse()?,
            "coef_norm" => self.coef_norm = value.parse()?,
            "temperature" => self.contrast.temperature = num(key, value)?,
            "positives_in_denominator" => self.contrast.positives_in_denominator = flag(key, value)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`. Blank lines and `#`
    /// comments are skipped. A `preset = <dataset>` line, if present, must come
    /// first and replaces the whole configuration with that preset.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key == "preset" {
                let (dataset, variant) = value.split_once(':').unwrap_or((value, "table2"));
                *self = TrainConfig::preset(dataset, variant)?;
                continue;
            }
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<TrainConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = TrainConfig::default();
        cfg.apply_text(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical `key = value` rendering; [`TrainConfig::apply_text`] reads it back.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let dims: Vec<String> = self.hidden_dims.iter().map(ToString::to_string).collect();
        let pairs: Vec<(&str, String)> = vec![
            ("dataset", self.dataset.clone()),
            ("learning_rate", format!("{:e}", self.learning_rate)),
            ("epochs", self.epochs.to_string()),
            ("hidden_dims", dims.join(",")),
            ("gnn_kind", self.gnn_kind.to_string()),
            ("activation", self.activation.to_string()),
            ("neighborhood_size", self.neighborhood_size.to_string()),
            ("lambda1", format!("{:e}", self.weights.nbr)),
            ("lambda2", format!("{:e}", self.weights.cse)),
            ("lambda3", format!("{:e}", self.weights.coef)),
            ("knn_source", self.knn_source.to_string()),
            ("knn_refresh_every", self.knn_refresh_every.to_string()),
            ("energy_fraction", format!("{:e}", self.affinity.energy_fraction)),
            ("rank_multiplier", self.affinity.rank_multiplier.to_string()),
            ("smoothing", self.affinity.smoothing.to_string()),
            ("affinity_power", format!("{:e}", self.affinity.power)),
            ("cse_mode", self.cse_mode.to_string()),
            ("nbr_enabled", self.nbr_enabled.to_string()),
            ("seed", self.seed.to_string()),
            ("eval_every", self.eval_every.to_string()),
            ("normalization", self.normalization.to_string()),
            ("coef_norm", self.coef_norm.to_string()),
            ("temperature", format!("{:e}", self.contrast.temperature)),
            (
                "positives_in_denominator",
                self.contrast.positives_in_denominator.to_string(),
            ),
        ];
        for (k, v) in pairs {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// SHA-256 of [`TrainConfig::to_text`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    /// Full layer-width chain `[d, hidden...]` for a graph with `d` features.
    pub fn dims_for(&self, num_features: usize) -> Vec<usize> {
        std::iter::once(num_features)
            .chain(self.hidden_dims.iter().copied())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_carry_published_settings() {
        let cora = TrainConfig::preset("cora", "table2").unwrap();
        assert_eq!(cora.learning_rate, 1e-4);
        assert_eq!(cora.epochs, 400);
        assert_eq!(cora.hidden_dims, vec![1024, 512]);
        assert_eq!(cora.neighborhood_size, 10);
        assert_eq!(cora.weights, LossWeights::new(10.0, 10.0, 10.0));
        assert_eq!(cora.activation, Activation::Prelu);
        assert_eq!(cora.gnn_kind, GnnKind::Attention);

        let acm = TrainConfig::preset("acm", "table2").unwrap();
        assert_eq!(acm.learning_rate, 5e-4);
        assert_eq!(acm.epochs, 200);
        assert_eq!(acm.weights, LossWeights::new(100.0, 200.0, 3500.0));

        let cs = TrainConfig::preset("citeseer", "table2").unwrap();
        assert_eq!(cs.weights, LossWeights::new(100.0, 1.0, 1.0));
        assert_eq!(cs.hidden_dims, vec![1024, 1024]);
        let cs_prose = TrainConfig::preset("citeseer", "prose").unwrap();
        assert_eq!(cs_prose.weights, LossWeights::new(10.0, 1.0, 1.0));

        let wiki = TrainConfig::preset("wiki", "table2").unwrap();
        assert_eq!(wiki.epochs, 300);
        assert_eq!(wiki.normalization, NormalizeMode::None);
        assert_eq!(wiki.weights, LossWeights::new(10.0, 1.0, 10.0));

        assert!(TrainConfig::preset("pubmed", "table2").is_err());
        assert!(TrainConfig::preset("cora", "fig5").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = TrainConfig::preset("acm", "table2").unwrap();
        cfg.affinity.energy_fraction = 0.25;
        cfg.contrast.positives_in_denominator = false;
        cfg.seed = 17;
        let mut back = TrainConfig::default();
        back.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn file_parsing() {
        let text = "# tiny\npreset = cora\nepochs = 3  # short\nk = 5\nhidden_dims = 64-32\n";
        let mut cfg = TrainConfig::default();
        cfg.apply_text(text).unwrap();
        assert_eq!(cfg.dataset, "cora");
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.neighborhood_size, 5);
        assert_eq!(cfg.hidden_dims, vec![64, 32]);
        assert_eq!(cfg.learning_rate, 1e-4);
    }

    #[test]
    fn invalid_values() {
        let mut cfg = TrainConfig::default();
        cfg.apply_text("k = 0").unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        assert!(TrainConfig::default().apply_text("bogus = 1").is_err());
        assert!(TrainConfig::default().apply_text("epochs").is_err());
        assert!(TrainConfig::default().apply_text("gnn = lstm").is_err());
        let mut neg = TrainConfig::default();
        neg.weights.cse = -1.0;
        assert!(neg.validate().is_err());
    }

    #[test]
    fn hash_tracks_changes() {
        let a = TrainConfig::default();
        let mut b = a.clone();
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
