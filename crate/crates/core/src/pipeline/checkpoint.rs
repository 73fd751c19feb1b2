//! JSON checkpoint of a trained model: named parameter matrices, model dims,
//! training-set embedding statistics, config and training log.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{TrainConfig, TrainedModel, TrainingLog};
use crate::datagen::{read_json, write_json};
use crate::model::{EmbeddingStats, ModelDims, TardParams};
use crate::nn::Matrix;
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "tard-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedMatrix {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub dims: ModelDims,
    pub params: Vec<NamedMatrix>,
    pub train_stats: EmbeddingStats,
    pub config: TrainConfig,
    pub log: TrainingLog,
}

impl Checkpoint {
    pub fn from_model(model: &TrainedModel) -> Self {
        let params = model
            .params
            .parameters()
            .iter()
            .map(|p| NamedMatrix {
                name: p.name.clone(),
                rows: p.value.rows(),
                cols: p.value.cols(),
                data: p.value.as_slice().to_vec(),
            })
            .collect();
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            dims: model.params.dims(),
            params,
            train_stats: model.train_stats.clone(),
            config: model.config.clone(),
            log: model.log.clone(),
        }
    }

    /// Validates the record and rebuilds the model.
    pub fn into_model(self) -> Result<TrainedModel> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!(
                "unknown format {:?}",
                self.format
            )));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {}",
                self.version
            )));
        }
        let mut named = Vec::with_capacity(self.params.len());
        for m in self.params {
            if m.data.len() != m.rows * m.cols {
                return Err(Error::Checkpoint(format!(
                    "{} declares {}x{} but holds {} values",
                    m.name,
                    m.rows,
                    m.cols,
                    m.data.len()
                )));
            }
            named.push((m.name, Matrix::from_vec(m.rows, m.cols, m.data)));
        }
        let params = TardParams::from_named(self.dims, named)?;
        let h = self.dims.d_hidden;
        let stats = &self.train_stats;
        if stats.mu.len() != h || stats.eta.shape() != (h, h) || stats.count == 0 {
            return Err(Error::Checkpoint(
                "training statistics do not match the hidden width".into(),
            ));
        }
        Ok(TrainedModel {
            params,
            train_stats: self.train_stats,
            config: self.config,
            log: self.log,
        })
    }
}

pub fn save_checkpoint(model: &TrainedModel, path: &Path) -> Result<()> {
    write_json(&Checkpoint::from_model(model), path)
}

pub fn load_checkpoint(path: &Path) -> Result<TrainedModel> {
    read_json::<Checkpoint>(path)?.into_model()
}
