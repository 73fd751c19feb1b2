use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AdaptSettings, AdaptationMode, Sample, TrainedModel};
use crate::eval::{compute_metrics, MetricsReport};
use crate::graph::{random_permutation, PropGraph};
use crate::model::{adaptation_loss, predict_proba, EmbeddingStats, Group, TardParams};
use crate::nn::{Adam, AdamConfig};
use crate::rng::{hash_str, rng_for};
use crate::{Error, Result};

const TTT_TAG: u64 = 4;

/// Groups updated at test time; the classification head stays frozen.
pub const ADAPTED_GROUPS: [Group; 2] = [Group::Shared, Group::Ssl];

#[derive(Debug, Clone)]
pub struct Adaptation {
    pub params: TardParams,
    /// Contrastive loss before and after adaptation, both measured on the
    /// same shuffled view.
    pub ssl_before: f64,
    pub ssl_after: f64,
    pub constraint_before: f64,
    pub constraint_after: f64,
    pub steps: usize,
}

/// Seed of the adaptation stream for one event; depends only on the run
/// seed and the event id.
pub fn event_seed(seed: u64, event_id: &str) -> u64 {
    crate::rng::derive_seed(seed, &[TTT_TAG, hash_str(event_id)])
}

/// Recalibrates the shared extractor and the SSL head on a single test graph
/// by minimizing `L_s + α₂·L_c` for `settings.ttt_steps` Adam steps with a
/// fresh optimizer. Classification head weights are returned untouched.
pub fn ttt_adapt(
    graph: &PropGraph,
    start: &TardParams,
    train_stats: &EmbeddingStats,
    settings: &AdaptSettings,
    seed: u64,
) -> Result<Adaptation> {
    let mut rng = rng_for(seed, &[]);
    let n = graph.num_nodes();
    let probe_perm = random_permutation(n, &mut rng);
    let before = adaptation_loss(
        graph,
        start,
        train_stats,
        settings.alpha2,
        probe_perm.clone(),
    )?;

    let mut params = start.clone();
    if settings.ttt_steps == 0 {
        return Ok(Adaptation {
            params,
            ssl_before: before.ssl,
            ssl_after: before.ssl,
            constraint_before: before.constraint,
            constraint_after: before.constraint,
            steps: 0,
        });
    }

    let mut adam = Adam::new(AdamConfig::with_lr(settings.ttt_lr));
    for step in 0..settings.ttt_steps {
        let perm = random_permutation(n, &mut rng);
        let loss = adaptation_loss(graph, &params, train_stats, settings.alpha2, perm)?;
        params.load_grads(&loss.grads, &ADAPTED_GROUPS);
        adam.step(params.group_mut(&ADAPTED_GROUPS));
        if !params.is_finite() {
            return Err(Error::Config(format!(
                "adaptation produced non-finite parameters at step {step}; lower ttt_lr"
            )));
        }
    }
    params.clear_grads();
    let after = adaptation_loss(graph, &params, train_stats, settings.alpha2, probe_perm)?;
    Ok(Adaptation {
        params,
        ssl_before: before.ssl,
        ssl_after: after.ssl,
        constraint_before: before.constraint,
        constraint_after: after.constraint,
        steps: settings.ttt_steps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub probs: Vec<f64>,
}

/// Class probabilities and argmax; ties go to the lower class index.
pub fn predict(graph: &PropGraph, params: &TardParams) -> Result<Prediction> {
    let probs = predict_proba(graph, params)?;
    let mut class = 0;
    for (j, &p) in probs.iter().enumerate() {
        if p > probs[class] {
            class = j;
        }
    }
    Ok(Prediction { class, probs })
}

/// Per-event outcome, one JSON Lines record each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventResult {
    pub id: String,
    pub label: usize,
    pub predicted: usize,
    pub probs: Vec<f64>,
    pub ssl_before: f64,
    pub ssl_after: f64,
    pub constraint_before: f64,
    pub constraint_after: f64,
    pub steps: usize,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub records: Vec<EventResult>,
    pub metrics: MetricsReport,
}

fn run_event(
    sample: &Sample,
    start: &TardParams,
    model: &TrainedModel,
    settings: &AdaptSettings,
) -> Result<(EventResult, TardParams)> {
    let t0 = Instant::now();
    let adapted = ttt_adapt(
        &sample.graph,
        start,
        &model.train_stats,
        settings,
        event_seed(settings.seed, &sample.id),
    )?;
    let pred = predict(&sample.graph, &adapted.params)?;
    let record = EventResult {
        id: sample.id.clone(),
        label: sample.label,
        predicted: pred.class,
        probs: pred.probs,
        ssl_before: adapted.ssl_before,
        ssl_after: adapted.ssl_after,
        constraint_before: adapted.constraint_before,
        constraint_after: adapted.constraint_after,
        steps: adapted.steps,
        wall_time_ms: t0.elapsed().as_secs_f64() * 1e3,
    };
    Ok((record, adapted.params))
}

fn check_compatible(test: &[Sample], model: &TrainedModel) -> Result<()> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let dims = model.params.dims();
    for s in test {
        if s.graph.feature_dim() != dims.d_in {
            return Err(Error::dim(
                "evaluate",
                format!(
                    "event {} has feature dim {} but the model expects {}",
                    s.id,
                    s.graph.feature_dim(),
                    dims.d_in
                ),
            ));
        }
        if s.label >= dims.classes {
            return Err(Error::InvalidLabel {
                label: s.label,
                classes: dims.classes,
            });
        }
    }
    Ok(())
}

/// Adapts from the trained parameters independently for every event. Events
/// run in parallel; results keep input order.
pub fn evaluate_episodic(
    test: &[Sample],
    model: &TrainedModel,
    settings: &AdaptSettings,
) -> Result<Evaluation> {
    check_compatible(test, model)?;
    let snapshot = model.params.snapshot();
    let records = test
        .par_iter()
        .map(|s| run_event(s, snapshot.params(), model, settings).map(|(r, _)| r))
        .collect::<Result<Vec<_>>>()?;
    finish(records, model)
}

/// Carries adapted parameters from each event to the next, in input order.
pub fn evaluate_online(
    test: &[Sample],
    model: &TrainedModel,
    settings: &AdaptSettings,
) -> Result<Evaluation> {
    check_compatible(test, model)?;
    let mut current = model.params.clone();
    let mut records = Vec::with_capacity(test.len());
    for s in test {
        let (record, next) = run_event(s, &current, model, settings)?;
        records.push(record);
        current = next;
    }
    finish(records, model)
}

pub fn evaluate(
    test: &[Sample],
    model: &TrainedModel,
    settings: &AdaptSettings,
) -> Result<Evaluation> {
    match settings.mode {
        AdaptationMode::Episodic => evaluate_episodic(test, model, settings),
        AdaptationMode::Online => evaluate_online(test, model, settings),
    }
}

fn finish(records: Vec<EventResult>, model: &TrainedModel) -> Result<Evaluation> {
    let metrics = compute_metrics(&records, model.params.dims().classes)?;
    Ok(Evaluation { records, metrics })
}
