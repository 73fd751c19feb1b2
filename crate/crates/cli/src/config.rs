use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;
use tard::datagen::{DomainSpec, ShiftSpec};
use tard::pipeline::{AdaptationMode, TrainConfig};

/// Everything an experiment needs, read from a TOML file. Missing fields take
/// their defaults; a missing `[shift]` table means the shift-mid preset,
/// while fields missing from a present `[shift]` table mean no change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Events in the source validation split.
    pub val_events: usize,
    /// Events in the shifted target test split.
    pub test_events: usize,
    /// Training seeds for `ablate` and `sweep`. Empty means `train.seed`.
    pub seeds: Vec<u64>,
    pub source: DomainSpec,
    pub shift: ShiftSpec,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            val_events: 100,
            test_events: 100,
            seeds: Vec::new(),
            source: DomainSpec::default(),
            shift: ShiftSpec::shift_mid(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub ttt_steps: Option<usize>,
    pub ttt_lr: Option<f64>,
    pub mode: Option<AdaptationMode>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }

    /// `--seed` sets the data seed and the training seed, and replaces the
    /// seed list.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.source.seed = seed;
            self.train.seed = seed;
            self.seeds = vec![seed];
        }
        if let Some(v) = o.alpha1 {
            self.train.alpha1 = v;
        }
        if let Some(v) = o.alpha2 {
            self.train.alpha2 = v;
        }
        if let Some(v) = o.ttt_steps {
            self.train.ttt_steps = v;
        }
        if let Some(v) = o.ttt_lr {
            self.train.ttt_lr = v;
        }
        if let Some(v) = o.mode {
            self.train.adaptation_mode = v;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate().context("invalid [source]")?;
        self.shift
            .validate(self.source.feature_dim)
            .context("invalid [shift]")?;
        self.train.validate().context("invalid [train]")?;
        if self.train.classes != 2 {
            bail!(
                "invalid [train]: the generator produces 2 classes, got classes = {}",
                self.train.classes
            );
        }
        if self.test_events == 0 {
            bail!("test_events must be at least 1");
        }
        Ok(())
    }

    pub fn run_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.train.seed]
        } else {
            self.seeds.clone()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}
