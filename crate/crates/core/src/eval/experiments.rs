//! Ablation variants and hyperparameter sensitivity sweeps.

use serde::{Deserialize, Serialize};

use super::MetricsReport;
use crate::pipeline::{
    evaluate, train_phase, AdaptSettings, Evaluation, Sample, TrainConfig, TrainedModel,
};
use crate::Result;

/// Nine points in `[0, 10]`: zero plus a roughly logarithmic ladder.
pub const SWEEP_GRID: [f64; 9] = [0.0, 0.01, 0.05, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Adaptation with the alignment constraint.
    Tard,
    /// Adaptation without the alignment constraint.
    TardConstraint,
    /// No adaptation.
    TardTtt,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Tard, Variant::TardConstraint, Variant::TardTtt];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Tard => "TARD",
            Variant::TardConstraint => "TARD-constraint",
            Variant::TardTtt => "TARD-ttt",
        }
    }

    pub fn settings(self, base: &AdaptSettings) -> AdaptSettings {
        match self {
            Variant::Tard => *base,
            Variant::TardConstraint => AdaptSettings {
                alpha2: 0.0,
                ..*base
            },
            Variant::TardTtt => AdaptSettings {
                ttt_steps: 0,
                ..*base
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ablation {
    pub model: TrainedModel,
    /// In [`Variant::ALL`] order.
    pub runs: Vec<(Variant, Evaluation)>,
}

impl Ablation {
    pub fn get(&self, variant: Variant) -> &Evaluation {
        &self
            .runs
            .iter()
            .find(|(v, _)| *v == variant)
            .expect("every variant is run")
            .1
    }
}

/// Trains once, then evaluates all three variants against that checkpoint.
pub fn run_ablation(train: &[Sample], test: &[Sample], config: &TrainConfig) -> Result<Ablation> {
    let model = train_phase(train, config)?;
    ablate_trained(model, test)
}

pub fn ablate_trained(model: TrainedModel, test: &[Sample]) -> Result<Ablation> {
    let base = model.config.adapt_settings();
    let runs = Variant::ALL
        .iter()
        .map(|&v| Ok((v, evaluate(test, &model, &v.settings(&base))?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ablation { model, runs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Alpha1,
    Alpha2,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Alpha1 => "alpha1",
            SweepParam::Alpha2 => "alpha2",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha1" => Ok(SweepParam::Alpha1),
            "alpha2" => Ok(SweepParam::Alpha2),
            other => Err(crate::Error::Config(format!(
                "unknown sweep parameter {other:?} (expected alpha1 or alpha2)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub metrics: MetricsReport,
}

/// Evaluates every [`SWEEP_GRID`] value of `which`, holding the rest of
/// `base` fixed. An `alpha1` sweep retrains per value; an `alpha2` sweep
/// reuses one trained model.
pub fn run_sensitivity(
    train: &[Sample],
    test: &[Sample],
    base: &TrainConfig,
    which: SweepParam,
) -> Result<Vec<SweepRow>> {
    let shared_model = match which {
        SweepParam::Alpha2 => Some(train_phase(train, base)?),
        SweepParam::Alpha1 => None,
    };
    SWEEP_GRID
        .iter()
        .map(|&value| {
            let metrics = match (&shared_model, which) {
                (Some(model), _) => {
                    let settings = AdaptSettings {
                        alpha2: value,
                        ..base.adapt_settings()
                    };
                    evaluate(test, model, &settings)?.metrics
                }
                (None, _) => {
                    let config = TrainConfig {
                        alpha1: value,
                        ..base.clone()
                    };
                    let model = train_phase(train, &config)?;
                    evaluate(test, &model, &config.adapt_settings())?.metrics
                }
            };
            Ok(SweepRow { value, metrics })
        })
        .collect()
}
