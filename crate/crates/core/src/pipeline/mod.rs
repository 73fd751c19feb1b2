//! Training, per-graph test-time adaptation, and evaluation.

mod adapt;
mod checkpoint;
mod config;
mod train;

pub use adapt::{
    evaluate, evaluate_episodic, evaluate_online, event_seed, predict, ttt_adapt, Adaptation,
    Evaluation, EventResult, Prediction, ADAPTED_GROUPS,
};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, NamedMatrix};
pub use config::{AdaptSettings, AdaptationMode, TrainConfig};
pub use train::{
    epoch_order, initial_params, step_permutation, train_phase, train_phase_observed, EpochLog,
    StepInfo, TrainedModel, TrainingLog,
};

use crate::graph::{to_prop_graph, AdjacencyMode, PropGraph, PropagationEvent};
use crate::Result;

/// A labelled event in runtime form.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub label: usize,
    pub graph: PropGraph,
}

pub fn prepare(events: &[PropagationEvent], mode: AdjacencyMode) -> Result<Vec<Sample>> {
    events
        .iter()
        .map(|e| {
            Ok(Sample {
                id: e.id.clone(),
                label: e.label,
                graph: to_prop_graph(e, mode)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests;
