use super::*;
use crate::datagen::{apply_shift, generate_domain, DomainSpec, ShiftSpec};
use crate::eval::compute_metrics;
use crate::graph::AdjacencyMode;
use crate::model::{main_loss, Group};
use crate::nn::{Adam, AdamConfig};

fn samples(spec: &DomainSpec, prefix: &str) -> Vec<Sample> {
    let events = generate_domain(spec, prefix).unwrap();
    prepare(&events, AdjacencyMode::UndirectedSymNorm).unwrap()
}

fn small_spec(seed: u64, n: usize) -> DomainSpec {
    DomainSpec {
        num_events: n,
        size_dist: (4, 12),
        feature_dim: 4,
        seed,
        ..DomainSpec::default()
    }
}

fn quick_config(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 4,
        patience: 0,
        d_hidden: 8,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn training_is_deterministic() {
    let train = samples(&small_spec(3, 20), "tr");
    let a = train_phase(&train, &quick_config(5)).unwrap();
    let b = train_phase(&train, &quick_config(5)).unwrap();
    assert!(a.params.bit_eq(&b.params));
    assert_eq!(a.log, b.log);
    let c = train_phase(&train, &quick_config(6)).unwrap();
    assert!(!a.params.bit_eq(&c.params));
}

#[test]
fn checkpoint_round_trip_is_byte_exact() {
    let train = samples(&small_spec(1, 12), "tr");
    let model = train_phase(&train, &quick_config(2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("a.json");
    let p2 = dir.path().join("b.json");
    save_checkpoint(&model, &p1).unwrap();
    let back = load_checkpoint(&p1).unwrap();
    assert!(back.params.bit_eq(&model.params));
    assert_eq!(back.train_stats, model.train_stats);
    assert_eq!(back.config, model.config);
    save_checkpoint(&back, &p2).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let train = samples(&small_spec(1, 6), "tr");
    let model = train_phase(&train, &quick_config(2)).unwrap();
    let mut ckpt = Checkpoint::from_model(&model);
    ckpt.params[0].data.pop();
    assert!(ckpt.into_model().is_err());
    let mut ckpt = Checkpoint::from_model(&model);
    ckpt.format = "other".into();
    assert!(ckpt.into_model().is_err());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{not json").unwrap();
    assert!(load_checkpoint(&path).is_err());
}

#[test]
fn zero_alpha1_matches_a_supervised_loop() {
    let train = samples(&small_spec(9, 10), "tr");
    let config = TrainConfig {
        alpha1: 0.0,
        ..quick_config(11)
    };
    let mut observed = Vec::new();
    let model = train_phase_observed(&train, &config, |s| observed.push(s.params.clone())).unwrap();

    let mut params = initial_params(&config, train[0].graph.feature_dim()).unwrap();
    let mut adam = Adam::new(AdamConfig::with_lr(config.train_lr));
    let mut step = 0;
    for epoch in 0..config.epochs {
        for idx in epoch_order(config.seed, epoch, train.len()) {
            let s = &train[idx];
            let loss = main_loss(&s.graph, s.label, &params).unwrap();
            params.load_grads(&loss.grads, &[Group::Shared, Group::Main, Group::Ssl]);
            adam.step(params.group_mut(&[Group::Shared, Group::Main, Group::Ssl]));
            assert!(params.bit_eq(&observed[step]), "diverged at step {step}");
            step += 1;
        }
    }
    assert_eq!(step, observed.len());
    assert!(params.bit_eq(&model.params));
}

#[test]
fn zero_steps_equals_plain_inference() {
    let train = samples(&small_spec(2, 12), "tr");
    let test = samples(&small_spec(4, 8), "te");
    let model = train_phase(&train, &quick_config(1)).unwrap();
    let settings = AdaptSettings {
        ttt_steps: 0,
        ..model.config.adapt_settings()
    };
    let eval = evaluate(&test, &model, &settings).unwrap();
    for (r, s) in eval.records.iter().zip(&test) {
        let plain = predict(&s.graph, &model.params).unwrap();
        assert_eq!(r.predicted, plain.class);
        assert!(r
            .probs
            .iter()
            .zip(&plain.probs)
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn adaptation_never_touches_the_classification_head() {
    let train = samples(&small_spec(2, 12), "tr");
    let test = samples(&small_spec(8, 10), "te");
    let model = train_phase(&train, &quick_config(1)).unwrap();
    let settings = model.config.adapt_settings();
    let head = model.params.group_bytes(Group::Main);
    for s in &test {
        let a = ttt_adapt(&s.graph, &model.params, &model.train_stats, &settings, 7).unwrap();
        assert_eq!(a.params.group_bytes(Group::Main), head);
        assert!(!a.params.group_bit_eq(&model.params, Group::Shared));
    }
}

#[test]
fn episodic_results_ignore_event_order() {
    let train = samples(&small_spec(2, 12), "tr");
    let test = samples(&small_spec(5, 9), "te");
    let model = train_phase(&train, &quick_config(1)).unwrap();
    let settings = model.config.adapt_settings();
    let forward = evaluate_episodic(&test, &model, &settings).unwrap();
    let reversed: Vec<Sample> = test.iter().rev().cloned().collect();
    let backward = evaluate_episodic(&reversed, &model, &settings).unwrap();
    for r in &forward.records {
        let other = backward.records.iter().find(|o| o.id == r.id).unwrap();
        assert_eq!(r.predicted, other.predicted);
        assert_eq!(r.probs, other.probs);
        assert_eq!(r.ssl_after.to_bits(), other.ssl_after.to_bits());
    }
    assert_eq!(forward.metrics.confusion, backward.metrics.confusion);
}

#[test]
fn online_with_one_event_equals_episodic() {
    let train = samples(&small_spec(2, 12), "tr");
    let test = samples(&small_spec(5, 1), "te");
    let model = train_phase(&train, &quick_config(1)).unwrap();
    let settings = model.config.adapt_settings();
    let a = evaluate_episodic(&test, &model, &settings).unwrap();
    let b = evaluate_online(&test, &model, &settings).unwrap();
    assert_eq!(a.records[0].probs, b.records[0].probs);
}

#[test]
fn online_mode_carries_parameters_forward() {
    let train = samples(&small_spec(2, 12), "tr");
    let test = samples(&small_spec(5, 6), "te");
    let model = train_phase(&train, &quick_config(1)).unwrap();
    let online = AdaptSettings {
        mode: AdaptationMode::Online,
        ..model.config.adapt_settings()
    };
    let a = evaluate(&test, &model, &online).unwrap();
    let b = evaluate(&test, &model, &model.config.adapt_settings()).unwrap();
    assert_eq!(a.records[0].probs, b.records[0].probs);
    assert_ne!(a.records[5].probs, b.records[5].probs);
}

#[test]
fn adaptation_lowers_contrastive_loss() {
    let train = samples(&small_spec(2, 30), "tr");
    let test = samples(&small_spec(13, 10), "te");
    let model = train_phase(&train, &quick_config(1)).unwrap();
    let settings = AdaptSettings {
        alpha2: 0.0,
        ..model.config.adapt_settings()
    };
    let improved = test
        .iter()
        .filter(|s| {
            let a = ttt_adapt(&s.graph, &model.params, &model.train_stats, &settings, 3).unwrap();
            a.ssl_after < a.ssl_before
        })
        .count();
    assert!(improved >= 9, "only {improved}/10 graphs improved");
}

#[test]
fn separable_domain_is_learned() {
    let spec = DomainSpec {
        num_events: 120,
        seed: 1,
        ..DomainSpec::separable()
    };
    let train = samples(&spec, "tr");
    let config = TrainConfig {
        epochs: 30,
        ..TrainConfig::default()
    };
    let model = train_phase(&train, &config).unwrap();
    let settings = AdaptSettings {
        ttt_steps: 0,
        ..config.adapt_settings()
    };
    let eval = evaluate(&train, &model, &settings).unwrap();
    assert!(
        eval.metrics.accuracy >= 0.95,
        "accuracy {}",
        eval.metrics.accuracy
    );
}

#[test]
fn null_domain_stays_near_chance() {
    let spec = DomainSpec {
        num_events: 200,
        size_dist: (5, 15),
        seed: 4,
        ..DomainSpec::null()
    };
    let train = samples(&spec, "tr");
    let test = samples(
        &DomainSpec {
            seed: 5,
            ..spec.clone()
        },
        "te",
    );
    let config = TrainConfig {
        epochs: 10,
        ..TrainConfig::default()
    };
    let model = train_phase(&train, &config).unwrap();
    let eval = evaluate(&test, &model, &config.adapt_settings()).unwrap();
    assert!(
        (eval.metrics.accuracy - 0.5).abs() < 0.15,
        "accuracy {}",
        eval.metrics.accuracy
    );
}

#[test]
fn half_turn_rotation_flips_predictions() {
    let spec = DomainSpec {
        num_events: 120,
        seed: 1,
        structure_signal_strength: 0.0,
        root_offset: 0.0,
        ..DomainSpec::separable()
    };
    let train = samples(&spec, "tr");
    let config = TrainConfig {
        epochs: 30,
        ..TrainConfig::default()
    };
    let model = train_phase(&train, &config).unwrap();
    let shifted = apply_shift(
        &DomainSpec { seed: 2, ..spec },
        &ShiftSpec {
            rotation_angle: std::f64::consts::PI,
            ..ShiftSpec::identity()
        },
    );
    let test = samples(&shifted, "te");
    let settings = AdaptSettings {
        ttt_steps: 0,
        ..config.adapt_settings()
    };
    let eval = evaluate(&test, &model, &settings).unwrap();
    assert!(
        eval.metrics.accuracy <= 0.1,
        "accuracy {}",
        eval.metrics.accuracy
    );
}

#[test]
fn mismatched_inputs_are_rejected() {
    let train = samples(&small_spec(2, 6), "tr");
    let model = train_phase(&train, &quick_config(1)).unwrap();
    let settings = model.config.adapt_settings();
    assert!(evaluate(&[], &model, &settings).is_err());
    let wide = samples(
        &DomainSpec {
            feature_dim: 6,
            ..small_spec(3, 2)
        },
        "w",
    );
    assert!(evaluate(&wide, &model, &settings).is_err());
    let mut bad = train.clone();
    bad[0].label = 5;
    assert!(train_phase(&bad, &quick_config(1)).is_err());
    assert!(train_phase(&[], &quick_config(1)).is_err());
    let cfg = TrainConfig {
        train_lr: 0.0,
        ..quick_config(1)
    };
    assert!(train_phase(&train, &cfg).is_err());
}

#[test]
fn early_stopping_ends_training() {
    let train = samples(&small_spec(2, 8), "tr");
    let config = TrainConfig {
        epochs: 500,
        patience: 3,
        min_delta: 10.0,
        ..quick_config(1)
    };
    let model = train_phase(&train, &config).unwrap();
    assert!(model.log.stopped_early);
    assert_eq!(model.log.epochs.len(), 4);
}

#[test]
fn metrics_follow_records() {
    let train = samples(&small_spec(2, 12), "tr");
    let model = train_phase(&train, &quick_config(1)).unwrap();
    let eval = evaluate(&train, &model, &model.config.adapt_settings()).unwrap();
    assert_eq!(
        compute_metrics(&eval.records, 2).unwrap().confusion,
        eval.metrics.confusion
    );
}
