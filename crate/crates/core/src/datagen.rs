//! Synthetic propagation cascades with controllable source→target shift, and
//! the JSON Lines dataset format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::PropagationEvent;
use crate::nn::Matrix;
use crate::rng::{derive_seed, rng_for};
use crate::{Error, Result};

/// Tag mixed into a source seed to obtain its target-domain seed.
const TARGET_SEED_TAG: u64 = 0x7461_7267_6574; // "target"

/// Parameters of one synthetic domain.
///
/// Class 0 and class 1 feature means sit at `±separation/2` along the first
/// feature axis, are then rotated by `mean_rotation` in the plane of the
/// first two axes and finally translated by `mean_translation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSpec {
    pub num_events: usize,
    /// Probability that an event belongs to class 0.
    pub class_balance: f64,
    pub feature_dim: usize,
    pub class_mean_separation: f64,
    pub feature_noise_std: f64,
    /// Inclusive `(min, max)` node count.
    pub size_dist: (usize, usize),
    /// 0 grows chain-like cascades, 1 broad preferential-attachment trees.
    pub branching_bias: f64,
    /// How far class 0 (up) and class 1 (down) tilt the branching bias.
    pub structure_signal_strength: f64,
    /// Added to the last feature coordinate of the source post.
    pub root_offset: f64,
    pub mean_rotation: f64,
    /// Empty means no translation.
    pub mean_translation: Vec<f64>,
    pub seed: u64,
}

impl Default for DomainSpec {
    /// Source domain of the `shift-mid` benchmark preset.
    fn default() -> Self {
        DomainSpec {
            num_events: 400,
            class_balance: 0.5,
            feature_dim: 8,
            class_mean_separation: 2.0,
            feature_noise_std: 1.0,
            size_dist: (10, 60),
            branching_bias: 0.5,
            structure_signal_strength: 1.0,
            root_offset: 1.0,
            mean_rotation: 0.0,
            mean_translation: Vec::new(),
            seed: 0,
        }
    }
}

impl DomainSpec {
    /// Well-separated, low-noise domain that any working classifier fits.
    pub fn separable() -> Self {
        DomainSpec {
            class_mean_separation: 4.0,
            feature_noise_std: 0.5,
            size_dist: (5, 20),
            ..DomainSpec::default()
        }
    }

    /// Domain whose labels carry no signal in features or structure.
    pub fn null() -> Self {
        DomainSpec {
            class_mean_separation: 0.0,
            structure_signal_strength: 0.0,
            ..DomainSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.num_events == 0 {
            return bad("num_events must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.class_balance) {
            return bad(format!(
                "class_balance {} outside [0, 1]",
                self.class_balance
            ));
        }
        if self.feature_dim < 2 {
            return bad("feature_dim must be at least 2".into());
        }
        if !(self.class_mean_separation >= 0.0 && self.class_mean_separation.is_finite()) {
            return bad("class_mean_separation must be finite and non-negative".into());
        }
        if !(self.feature_noise_std > 0.0 && self.feature_noise_std.is_finite()) {
            return bad("feature_noise_std must be finite and positive".into());
        }
        let (lo, hi) = self.size_dist;
        if lo < 1 || hi < lo {
            return bad(format!("size_dist ({lo}, {hi}) needs 1 <= min <= max"));
        }
        if !(0.0..=1.0).contains(&self.branching_bias) {
            return bad(format!(
                "branching_bias {} outside [0, 1]",
                self.branching_bias
            ));
        }
        if !(self.structure_signal_strength >= 0.0 && self.structure_signal_strength.is_finite()) {
            return bad("structure_signal_strength must be finite and non-negative".into());
        }
        if !self.root_offset.is_finite() || !self.mean_rotation.is_finite() {
            return bad("root_offset and mean_rotation must be finite".into());
        }
        if !self.mean_translation.is_empty() && self.mean_translation.len() != self.feature_dim {
            return bad(format!(
                "mean_translation has {} entries, feature_dim is {}",
                self.mean_translation.len(),
                self.feature_dim
            ));
        }
        if self.mean_translation.iter().any(|v| !v.is_finite()) {
            return bad("mean_translation must be finite".into());
        }
        Ok(())
    }

    /// Feature mean of events with label `class`.
    pub fn class_mean(&self, class: usize) -> Vec<f64> {
        let sign = if class == 0 { 1.0 } else { -1.0 };
        let r = sign * self.class_mean_separation / 2.0;
        let mut mean = vec![0.0; self.feature_dim];
        mean[0] = r * self.mean_rotation.cos();
        mean[1] = r * self.mean_rotation.sin();
        for (m, t) in mean.iter_mut().zip(&self.mean_translation) {
            *m += t;
        }
        mean
    }
}

/// Source→target transformation of a [`DomainSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftSpec {
    /// Radians, applied in the plane of the first two feature axes.
    pub rotation_angle: f64,
    /// Empty means no translation.
    pub mean_translation: Vec<f64>,
    pub noise_scale_factor: f64,
    pub size_scale_factor: f64,
    pub branching_shift: f64,
}

impl Default for ShiftSpec {
    fn default() -> Self {
        ShiftSpec::identity()
    }
}

impl ShiftSpec {
    pub fn identity() -> Self {
        ShiftSpec {
            rotation_angle: 0.0,
            mean_translation: Vec::new(),
            noise_scale_factor: 1.0,
            size_scale_factor: 1.0,
            branching_shift: 0.0,
        }
    }

    /// Target shift of the `shift-mid` benchmark preset.
    pub fn shift_mid() -> Self {
        ShiftSpec {
            rotation_angle: std::f64::consts::FRAC_PI_3,
            noise_scale_factor: 1.25,
            size_scale_factor: 1.5,
            ..ShiftSpec::identity()
        }
    }

    pub fn validate(&self, feature_dim: usize) -> Result<()> {
        let finite = self.rotation_angle.is_finite()
            && self.noise_scale_factor.is_finite()
            && self.size_scale_factor.is_finite()
            && self.branching_shift.is_finite()
            && self.mean_translation.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("shift values must be finite".into()));
        }
        if self.size_scale_factor <= 0.0 || self.noise_scale_factor <= 0.0 {
            return Err(Error::Config(
                "size_scale_factor and noise_scale_factor must be positive".into(),
            ));
        }
        if !self.mean_translation.is_empty() && self.mean_translation.len() != feature_dim {
            return Err(Error::Config(format!(
                "shift mean_translation has {} entries, feature_dim is {feature_dim}",
                self.mean_translation.len()
            )));
        }
        Ok(())
    }
}

/// Target-domain spec obtained by shifting `spec`.
pub fn apply_shift(spec: &DomainSpec, shift: &ShiftSpec) -> DomainSpec {
    let mut out = spec.clone();
    out.mean_rotation += shift.rotation_angle;
    if !shift.mean_translation.is_empty() {
        if out.mean_translation.is_empty() {
            out.mean_translation = vec![0.0; spec.feature_dim];
        }
        for (m, t) in out.mean_translation.iter_mut().zip(&shift.mean_translation) {
            *m += t;
        }
    }
    out.feature_noise_std *= shift.noise_scale_factor;
    let scale = |n: usize| ((n as f64 * shift.size_scale_factor).round() as usize).max(1);
    let lo = scale(spec.size_dist.0);
    out.size_dist = (lo, scale(spec.size_dist.1).max(lo));
    out.branching_bias = (spec.branching_bias + shift.branching_shift).clamp(0.0, 1.0);
    out.seed = derive_seed(spec.seed, &[TARGET_SEED_TAG]);
    out
}

/// Generates `spec.num_events` cascades. Each event draws from its own
/// stream derived from `(spec.seed, index)`, so output is independent of
/// thread count.
pub fn generate_domain(spec: &DomainSpec, id_prefix: &str) -> Result<Vec<PropagationEvent>> {
    spec.validate()?;
    let means = [spec.class_mean(0), spec.class_mean(1)];
    Ok((0..spec.num_events)
        .into_par_iter()
        .map(|k| generate_event(spec, &means, format!("{id_prefix}{k:05}"), k as u64))
        .collect())
}

fn generate_event(
    spec: &DomainSpec,
    means: &[Vec<f64>; 2],
    id: String,
    index: u64,
) -> PropagationEvent {
    let mut rng = rng_for(spec.seed, &[index]);
    let label = usize::from(rng.random::<f64>() >= spec.class_balance);
    let (lo, hi) = spec.size_dist;
    let n = rng.random_range(lo..=hi);

    let tilt = if label == 0 { 0.25 } else { -0.25 };
    let branching = (spec.branching_bias + tilt * spec.structure_signal_strength).clamp(0.0, 1.0);
    let mut children = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for node in 1..n {
        let parent = if rng.random::<f64>() < branching {
            // Preferential attachment on child count + 1.
            let total: usize = children[..node].iter().map(|c| c + 1).sum();
            let mut pick = rng.random_range(0..total);
            let mut chosen = 0;
            for (j, c) in children[..node].iter().enumerate() {
                if pick < c + 1 {
                    chosen = j;
                    break;
                }
                pick -= c + 1;
            }
            chosen
        } else {
            node - 1
        };
        children[parent] += 1;
        edges.push((parent, node));
    }

    let noise = Normal::new(0.0, spec.feature_noise_std).expect("validated noise std");
    let d = spec.feature_dim;
    let mut features = Matrix::zeros(n, d);
    for i in 0..n {
        for (f, m) in features.row_mut(i).iter_mut().zip(&means[label]) {
            *f = m + noise.sample(&mut rng);
        }
    }
    features[(0, d - 1)] += spec.root_offset;

    PropagationEvent {
        id,
        label,
        edges,
        features,
    }
}

#[derive(Serialize, Deserialize)]
struct EventRecord {
    id: String,
    label: usize,
    edges: Vec<[usize; 2]>,
    features: Vec<Vec<f64>>,
}

/// Writes one JSON object per line. Floats use shortest round-trip form, so
/// reading back reproduces every bit.
pub fn write_dataset(events: &[PropagationEvent], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for e in events {
        let record = EventRecord {
            id: e.id.clone(),
            label: e.label,
            edges: e.edges.iter().map(|&(s, t)| [s, t]).collect(),
            features: e.features.to_rows(),
        };
        serde_json::to_writer(&mut w, &record)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a JSON Lines dataset. Blank lines are skipped; every event must
/// share one feature dimension.
pub fn read_dataset(path: &Path) -> Result<Vec<PropagationEvent>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut events = Vec::new();
    let mut dim = None;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EventRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(lineno, e.to_string()))?;
        let n = record.features.len();
        if n == 0 {
            return Err(parse_err(lineno, "event has no feature rows".into()));
        }
        let d = record.features[0].len();
        if record.features.iter().any(|r| r.len() != d) {
            return Err(parse_err(lineno, "ragged feature rows".into()));
        }
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(parse_err(
                    lineno,
                    format!("feature dimension {d}, earlier events have {expected}"),
                ))
            }
            _ => {}
        }
        let event = PropagationEvent {
            id: record.id,
            label: record.label,
            edges: record.edges.into_iter().map(|[s, t]| (s, t)).collect(),
            features: Matrix::from_rows(&record.features),
        };
        for &(s, t) in &event.edges {
            if s >= n || t >= n || s == t {
                return Err(parse_err(
                    lineno,
                    format!("invalid edge ({s}, {t}) for {n} nodes"),
                ));
            }
        }
        if !event.features.is_finite() {
            return Err(parse_err(lineno, "non-finite feature value".into()));
        }
        events.push(event);
    }
    Ok(events)
}

/// Sidecar describing a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub file: String,
    pub num_events: usize,
    pub feature_dim: usize,
    pub num_classes: usize,
    pub domain: DomainSpec,
    /// Present for target-domain files.
    pub shift: Option<ShiftSpec>,
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}
