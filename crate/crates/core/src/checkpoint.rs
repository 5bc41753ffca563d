//! Trained-model checkpoints: the configuration plus every parameter tensor
//! under a stable name, stored as a gzip-compressed bincode stream behind a
//! magic header.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::gnn::{AutoencoderParams, LayerParams};
use crate::model::Model;
use crate::self_expression::SelfExpressionMatrix;

const CHECKPOINT_MAGIC: &[u8; 8] = b"NCAGCCK\x01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub num_nodes: usize,
    pub num_features: usize,
    pub num_clusters: usize,
    pub epochs_completed: usize,
    pub tensors: BTreeMap<String, Tensor>,
}

fn matrix_tensor(m: &Array2<f64>) -> Tensor {
    Tensor {
        shape: vec![m.nrows(), m.ncols()],
        data: m.iter().copied().collect(),
    }
}

fn vector_tensor(v: &[f64]) -> Tensor {
    Tensor {
        shape: vec![v.len()],
        data: v.to_vec(),
    }
}

impl Checkpoint {
    pub fn from_model(
        model: &Model,
        config: &TrainConfig,
        num_clusters: usize,
        epochs_completed: usize,
    ) -> Checkpoint {
        let mut tensors = BTreeMap::new();
        let stacks = [
            ("encoder", &model.autoencoder.encoder),
            ("decoder", &model.autoencoder.decoder),
        ];
        for (stage, layers) in stacks {
            for (i, l) in layers.iter().enumerate() {
                tensors.insert(format!("{stage}.{i}.weight"), matrix_tensor(&l.weight));
                tensors.insert(
                    format!("{stage}.{i}.attention"),
                    vector_tensor(l.attention.as_slice().expect("standard layout")),
                );
                tensors.insert(format!("{stage}.{i}.prelu_slope"), vector_tensor(&[l.prelu_slope]));
            }
        }
        tensors.insert(
            "self_expression".into(),
            matrix_tensor(&model.self_expression.coefficients),
        );
        Checkpoint {
            config: config.clone(),
            num_nodes: model.num_nodes(),
            num_features: model.autoencoder.input_dim(),
            num_clusters,
            epochs_completed,
            tensors,
        }
    }

    fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Serde(format!("checkpoint is missing tensor {name:?}")))
    }

    fn matrix(&self, name: &str) -> Result<Array2<f64>> {
        let t = self.tensor(name)?;
        match t.shape[..] {
            [r, c] => Array2::from_shape_vec((r, c), t.data.clone())
                .map_err(|e| Error::Serde(format!("tensor {name:?}: {e}"))),
            _ => Err(Error::Serde(format!("tensor {name:?} is not a matrix"))),
        }
    }

    fn scalar(&self, name: &str) -> Result<f64> {
        match self.tensor(name)?.data[..] {
            [v] => Ok(v),
            _ => Err(Error::Serde(format!("tensor {name:?} is not a scalar"))),
        }
    }

    pub fn self_expression(&self) -> Result<SelfExpressionMatrix> {
        SelfExpressionMatrix::from_matrix(self.matrix("self_expression")?)
    }

    pub fn to_model(&self) -> Result<Model> {
        let depth = self.config.hidden_dims.len();
        let layer = |stage: &str, i: usize| -> Result<LayerParams> {
            Ok(LayerParams {
                kind: self.config.gnn_kind,
                weight: self.matrix(&format!("{stage}.{i}.weight"))?,
                attention: Array1::from(self.tensor(&format!("{stage}.{i}.attention"))?.data.clone()),
                activation: self.config.activation,
                prelu_slope: self.scalar(&format!("{stage}.{i}.prelu_slope"))?,
            })
        };
        let encoder = (0..depth).map(|i| layer("encoder", i)).collect::<Result<_>>()?;
        let decoder = (0..depth).map(|i| layer("decoder", i)).collect::<Result<_>>()?;
        Ok(Model {
            autoencoder: AutoencoderParams { encoder, decoder },
            self_expression: self.self_expression()?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = BufWriter::new(file);
        writer.write_all(CHECKPOINT_MAGIC).map_err(|e| Error::io(path, e))?;
        let mut encoder = GzEncoder::new(writer, Compression::fast());
        bincode::serialize_into(&mut encoder, self).map_err(|e| Error::Serde(e.to_string()))?;
        encoder
            .finish()
            .and_then(|mut w| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let mut magic = [0u8; 8];
        reader.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Serde(format!("{} is not a checkpoint", path.display())));
        }
        let ckpt: Checkpoint = bincode::deserialize_from(GzDecoder::new(reader))
            .map_err(|e| Error::Serde(format!("{}: {e}", path.display())))?;
        ckpt.config.validate()?;
        Ok(ckpt)
    }
}
