use serde::{Deserialize, Serialize};

use crate::graph::AdjacencyMode;
use crate::model::ModelDims;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdaptationMode {
    /// Every test graph adapts from the trained parameters.
    #[default]
    Episodic,
    /// Adapted parameters carry over from one test graph to the next.
    Online,
}

impl std::str::FromStr for AdaptationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "episodic" => Ok(AdaptationMode::Episodic),
            "online" => Ok(AdaptationMode::Online),
            other => Err(Error::Config(format!(
                "unknown adaptation mode {other:?} (expected episodic or online)"
            ))),
        }
    }
}

/// Hyperparameters of training and test-time adaptation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Weight of the contrastive loss during training.
    pub alpha1: f64,
    /// Weight of the statistics-alignment penalty during adaptation.
    pub alpha2: f64,
    pub epochs: usize,
    /// Epochs without `min_delta` improvement of the mean training loss
    /// before stopping. Zero disables early stopping.
    pub patience: usize,
    pub min_delta: f64,
    pub train_lr: f64,
    pub ttt_lr: f64,
    pub ttt_steps: usize,
    pub adaptation_mode: AdaptationMode,
    pub seed: u64,
    pub d_hidden: usize,
    pub shared_layers: usize,
    pub main_layers: usize,
    pub ssl_layers: usize,
    pub classes: usize,
    pub adjacency: AdjacencyMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha1: 1.0,
            alpha2: 0.1,
            epochs: 200,
            patience: 20,
            min_delta: 1e-4,
            train_lr: 5e-3,
            ttt_lr: 1e-3,
            ttt_steps: 10,
            adaptation_mode: AdaptationMode::Episodic,
            seed: 0,
            d_hidden: 16,
            shared_layers: 1,
            main_layers: 1,
            ssl_layers: 1,
            classes: 2,
            adjacency: AdjacencyMode::UndirectedSymNorm,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("min_delta", self.min_delta),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        for (name, v) in [("train_lr", self.train_lr), ("ttt_lr", self.ttt_lr)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        self.dims(1).validate()
    }

    pub fn dims(&self, d_in: usize) -> ModelDims {
        ModelDims {
            d_in,
            d_hidden: self.d_hidden,
            classes: self.classes,
            shared_layers: self.shared_layers,
            main_layers: self.main_layers,
            ssl_layers: self.ssl_layers,
        }
    }

    pub fn adapt_settings(&self) -> AdaptSettings {
        AdaptSettings {
            alpha2: self.alpha2,
            ttt_lr: self.ttt_lr,
            ttt_steps: self.ttt_steps,
            mode: self.adaptation_mode,
            seed: self.seed,
        }
    }
}

/// The subset of [`TrainConfig`] that governs the adaptation stage, so
/// ablations can vary it against one trained checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptSettings {
    pub alpha2: f64,
    pub ttt_lr: f64,
    pub ttt_steps: usize,
    pub mode: AdaptationMode,
    pub seed: u64,
}
