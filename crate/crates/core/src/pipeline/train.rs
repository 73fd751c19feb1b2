use serde::{Deserialize, Serialize};

use super::{Sample, TrainConfig};
use crate::graph::random_permutation;
use crate::model::{compute_embedding_stats, joint_loss, EmbeddingStats, Group, TardParams};
use crate::nn::{Adam, AdamConfig};
use crate::rng::rng_for;
use crate::{Error, Result};

const INIT_TAG: u64 = 1;
const EPOCH_TAG: u64 = 2;
const STEP_TAG: u64 = 3;

pub(crate) const ALL_GROUPS: [Group; 3] = [Group::Shared, Group::Main, Group::Ssl];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub main_loss: f64,
    pub ssl_loss: f64,
    pub total_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    pub steps: usize,
    pub stopped_early: bool,
}

/// A trained network together with the embedding statistics of its training
/// set, which the adaptation constraint needs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: TardParams,
    pub train_stats: EmbeddingStats,
    pub config: TrainConfig,
    pub log: TrainingLog,
}

/// Parameter initialization used by [`train_phase`] for a given seed.
pub fn initial_params(config: &TrainConfig, d_in: usize) -> Result<TardParams> {
    TardParams::init(config.dims(d_in), &mut rng_for(config.seed, &[INIT_TAG]))
}

/// Visiting order of the training set in `epoch`.
pub fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    random_permutation(n, &mut rng_for(seed, &[EPOCH_TAG, epoch as u64]))
}

/// Shuffle of the contrastive view at one training step.
pub fn step_permutation(seed: u64, epoch: usize, position: usize, num_nodes: usize) -> Vec<usize> {
    random_permutation(
        num_nodes,
        &mut rng_for(seed, &[STEP_TAG, epoch as u64, position as u64]),
    )
}

/// What the per-step observer of [`train_phase_observed`] sees.
pub struct StepInfo<'a> {
    pub epoch: usize,
    pub position: usize,
    pub sample_index: usize,
    pub main_loss: f64,
    pub ssl_loss: f64,
    pub params: &'a TardParams,
}

pub fn train_phase(train: &[Sample], config: &TrainConfig) -> Result<TrainedModel> {
    train_phase_observed(train, config, |_| {})
}

/// Joint training of all three parameter groups on `L_m + α₁·L_s`, one graph
/// per optimizer step. `observer` runs after every update.
pub fn train_phase_observed(
    train: &[Sample],
    config: &TrainConfig,
    mut observer: impl FnMut(&StepInfo<'_>),
) -> Result<TrainedModel> {
    config.validate()?;
    let first = train.first().ok_or(Error::Empty("training set"))?;
    let d_in = first.graph.feature_dim();
    for s in train {
        if s.graph.feature_dim() != d_in {
            return Err(Error::dim(
                "train_phase",
                format!(
                    "event {} has feature dim {}, expected {d_in}",
                    s.id,
                    s.graph.feature_dim()
                ),
            ));
        }
        if s.label >= config.classes {
            return Err(Error::InvalidLabel {
                label: s.label,
                classes: config.classes,
            });
        }
    }

    let mut params = initial_params(config, d_in)?;
    let mut adam = Adam::new(AdamConfig::with_lr(config.train_lr));
    let mut log = TrainingLog::default();
    let mut best = f64::INFINITY;
    let mut stale = 0;

    for epoch in 0..config.epochs {
        let (mut sum_main, mut sum_ssl) = (0.0, 0.0);
        for (position, &idx) in epoch_order(config.seed, epoch, train.len())
            .iter()
            .enumerate()
        {
            let sample = &train[idx];
            let perm = step_permutation(config.seed, epoch, position, sample.graph.num_nodes());
            let loss = joint_loss(&sample.graph, sample.label, &params, config.alpha1, perm)?;
            params.load_grads(&loss.grads, &ALL_GROUPS);
            adam.step(params.group_mut(&ALL_GROUPS));
            sum_main += loss.main;
            sum_ssl += loss.ssl;
            log.steps += 1;
            observer(&StepInfo {
                epoch,
                position,
                sample_index: idx,
                main_loss: loss.main,
                ssl_loss: loss.ssl,
                params: &params,
            });
        }
        if !params.is_finite() {
            return Err(Error::Config(format!(
                "training diverged in epoch {epoch}; lower train_lr"
            )));
        }
        let n = train.len() as f64;
        let entry = EpochLog {
            epoch,
            main_loss: sum_main / n,
            ssl_loss: sum_ssl / n,
            total_loss: (sum_main + config.alpha1 * sum_ssl) / n,
        };
        let total = entry.total_loss;
        log.epochs.push(entry);
        if config.patience > 0 {
            if best - total > config.min_delta {
                best = total;
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.patience {
                    log.stopped_early = true;
                    break;
                }
            }
        }
    }

    let graphs: Vec<_> = train.iter().map(|s| s.graph.clone()).collect();
    let train_stats = compute_embedding_stats(&graphs, &params)?;
    params.clear_grads();
    Ok(TrainedModel {
        params,
        train_stats,
        config: config.clone(),
        log,
    })
}
