use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::nn::{Matrix, Parameter};
use crate::{Error, Result};

/// Layer counts and widths of the Y-shaped network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub d_in: usize,
    pub d_hidden: usize,
    pub classes: usize,
    pub shared_layers: usize,
    pub main_layers: usize,
    pub ssl_layers: usize,
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_in", self.d_in),
            ("d_hidden", self.d_hidden),
            ("shared_layers", self.shared_layers),
            ("main_layers", self.main_layers),
            ("ssl_layers", self.ssl_layers),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.classes < 2 {
            return Err(Error::Config("classes must be at least 2".into()));
        }
        Ok(())
    }
}

/// Which branch of the Y a parameter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    /// Shared feature extractor.
    Shared,
    /// Classification head (frozen during adaptation).
    Main,
    /// Self-supervised head.
    Ssl,
}

fn group_at(dims: &ModelDims, index: usize) -> Group {
    if index < dims.shared_layers {
        Group::Shared
    } else if index < dims.shared_layers + dims.main_layers + 2 {
        Group::Main
    } else {
        Group::Ssl
    }
}

/// All trainable weights, stored flat in a fixed order:
/// `shared.0..l`, `main.0..p`, `main.out_w`, `main.out_b`, `ssl.0..t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TardParams {
    dims: ModelDims,
    params: Vec<Parameter>,
}

impl TardParams {
    pub fn zeros(dims: ModelDims) -> Result<Self> {
        dims.validate()?;
        let params = Self::layout(&dims)
            .into_iter()
            .map(|(name, r, c)| Parameter::new(name, Matrix::zeros(r, c)))
            .collect();
        Ok(TardParams { dims, params })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init<R: Rng + ?Sized>(dims: ModelDims, rng: &mut R) -> Result<Self> {
        let mut out = Self::zeros(dims)?;
        for p in &mut out.params {
            if p.name == "main.out_b" {
                continue;
            }
            let (r, c) = p.value.shape();
            let bound = (6.0 / (r + c) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            p.value
                .as_mut_slice()
                .iter_mut()
                .for_each(|v| *v = dist.sample(rng));
        }
        Ok(out)
    }

    /// Rebuilds parameters from named matrices, checking names and shapes.
    pub fn from_named(dims: ModelDims, named: Vec<(String, Matrix)>) -> Result<Self> {
        dims.validate()?;
        let layout = Self::layout(&dims);
        if layout.len() != named.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, found {}",
                layout.len(),
                named.len()
            )));
        }
        let mut params = Vec::with_capacity(layout.len());
        for ((name, r, c), (got_name, value)) in layout.into_iter().zip(named) {
            if name != got_name || value.shape() != (r, c) {
                return Err(Error::Checkpoint(format!(
                    "expected {name} {r}x{c}, found {got_name} {:?}",
                    value.shape()
                )));
            }
            if !value.is_finite() {
                return Err(Error::Checkpoint(format!("{name} holds non-finite values")));
            }
            params.push(Parameter::new(name, value));
        }
        Ok(TardParams { dims, params })
    }

    fn layout(dims: &ModelDims) -> Vec<(String, usize, usize)> {
        let h = dims.d_hidden;
        let mut out = Vec::new();
        for i in 0..dims.shared_layers {
            let fan_in = if i == 0 { dims.d_in } else { h };
            out.push((format!("shared.{i}"), fan_in, h));
        }
        for i in 0..dims.main_layers {
            out.push((format!("main.{i}"), h, h));
        }
        out.push(("main.out_w".into(), h, dims.classes));
        out.push(("main.out_b".into(), 1, dims.classes));
        for i in 0..dims.ssl_layers {
            out.push((format!("ssl.{i}"), h, h));
        }
        out
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.params
    }

    pub fn group_of(&self, index: usize) -> Group {
        group_at(&self.dims, index)
    }

    pub(crate) fn shared(&self, i: usize) -> &Matrix {
        &self.params[i].value
    }

    pub(crate) fn main(&self, i: usize) -> &Matrix {
        &self.params[self.dims.shared_layers + i].value
    }

    pub(crate) fn out_w(&self) -> &Matrix {
        &self.params[self.out_w_index()].value
    }

    pub(crate) fn out_b(&self) -> &Matrix {
        &self.params[self.out_w_index() + 1].value
    }

    pub(crate) fn ssl(&self, i: usize) -> &Matrix {
        &self.params[self.out_w_index() + 2 + i].value
    }

    pub(crate) fn main_index(&self, i: usize) -> usize {
        self.dims.shared_layers + i
    }

    pub(crate) fn out_w_index(&self) -> usize {
        self.dims.shared_layers + self.dims.main_layers
    }

    pub(crate) fn ssl_index(&self, i: usize) -> usize {
        self.out_w_index() + 2 + i
    }

    pub fn values(&self) -> Vec<Matrix> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    /// Copy with every parameter value replaced, in layout order.
    pub fn with_values(&self, values: &[Matrix]) -> TardParams {
        assert_eq!(values.len(), self.params.len());
        let mut out = self.clone();
        for (p, v) in out.params.iter_mut().zip(values) {
            assert_eq!(p.value.shape(), v.shape(), "{}", p.name);
            p.value = v.clone();
        }
        out
    }

    /// Mutable access to the parameters of the given groups, for an optimizer.
    pub fn group_mut<'a>(
        &'a mut self,
        groups: &'a [Group],
    ) -> impl Iterator<Item = &'a mut Parameter> {
        let dims = self.dims;
        self.params
            .iter_mut()
            .enumerate()
            .filter(move |(i, _)| groups.contains(&group_at(&dims, *i)))
            .map(|(_, p)| p)
    }

    /// Installs gradients for the given groups and clears the others.
    pub fn load_grads(&mut self, grads: &Gradients, groups: &[Group]) {
        for i in 0..self.params.len() {
            if groups.contains(&self.group_of(i)) {
                self.params[i].set_grad(grads.values[i].clone());
            } else {
                self.params[i].grad = None;
            }
        }
    }

    pub fn clear_grads(&mut self) {
        self.params.iter_mut().for_each(|p| p.grad = None);
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.is_finite())
    }

    /// Bit equality of every parameter belonging to `group`.
    pub fn group_bit_eq(&self, other: &TardParams, group: Group) -> bool {
        self.dims == other.dims
            && self
                .params
                .iter()
                .zip(&other.params)
                .enumerate()
                .filter(|(i, _)| self.group_of(*i) == group)
                .all(|(_, (a, b))| a.value.bit_eq(&b.value))
    }

    pub fn bit_eq(&self, other: &TardParams) -> bool {
        [Group::Shared, Group::Main, Group::Ssl]
            .iter()
            .all(|&g| self.group_bit_eq(other, g))
    }

    /// Raw little-endian bytes of one group's values, in layout order.
    pub fn group_bytes(&self, group: Group) -> Vec<u8> {
        self.params
            .iter()
            .enumerate()
            .filter(|(i, _)| self.group_of(*i) == group)
            .flat_map(|(_, p)| p.value.as_slice().iter().flat_map(|v| v.to_le_bytes()))
            .collect()
    }

    pub fn snapshot(&self) -> ParamSnapshot {
        let mut copy = self.clone();
        copy.clear_grads();
        ParamSnapshot(Arc::new(copy))
    }
}

/// Immutable, cheaply shareable copy of a parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSnapshot(Arc<TardParams>);

impl ParamSnapshot {
    pub fn restore(&self) -> TardParams {
        (*self.0).clone()
    }

    pub fn params(&self) -> &TardParams {
        &self.0
    }
}

/// Gradients aligned with [`TardParams`] layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub values: Vec<Matrix>,
}

impl Gradients {
    pub fn zeros_like(params: &TardParams) -> Self {
        Gradients {
            values: params
                .params
                .iter()
                .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
                .collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Gradients, s: f64) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            a.add_scaled(b, s);
        }
    }

    /// True when every entry of every matrix in `group` is exactly zero.
    pub fn group_is_zero(&self, params: &TardParams, group: Group) -> bool {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| params.group_of(*i) == group)
            .all(|(_, m)| m.as_slice().iter().all(|v| v.to_bits() == 0))
    }
}
