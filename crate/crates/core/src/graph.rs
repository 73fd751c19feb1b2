//! Propagation events, adjacency construction and normalization, and the
//! node-feature shuffle used to build the corrupted contrastive view.
//!
//! All matrices are dense. That is comfortable up to a few thousand nodes
//! per event; beyond roughly 5k nodes the `N²` adjacency dominates memory.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::Matrix;
use crate::{Error, Result};

/// One news event: a source post (node 0), its responses, the reply edges
/// between them and one feature row per post.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationEvent {
    pub id: String,
    pub label: usize,
    pub edges: Vec<(usize, usize)>,
    pub features: Matrix,
}

impl PropagationEvent {
    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        let invalid = |reason: String| Error::InvalidEvent {
            id: self.id.clone(),
            reason,
        };
        let n = self.num_nodes();
        if n == 0 {
            return Err(invalid("event has no nodes".into()));
        }
        if self.label >= num_classes {
            return Err(invalid(format!(
                "label {} outside 0..{num_classes}",
                self.label
            )));
        }
        for &(s, t) in &self.edges {
            if s >= n || t >= n {
                return Err(invalid(format!("edge ({s}, {t}) outside 0..{n}")));
            }
            if s == t {
                return Err(invalid(format!("self-edge ({s}, {t})")));
            }
        }
        if !self.features.is_finite() {
            return Err(invalid("non-finite feature value".into()));
        }
        Ok(())
    }
}

/// Runtime form of an event: normalized adjacency plus features.
#[derive(Debug, Clone, PartialEq)]
pub struct PropGraph {
    pub adj_norm: Matrix,
    pub features: Matrix,
}

impl PropGraph {
    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Relabels nodes so that new node `i` is old node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> PropGraph {
        let n = self.num_nodes();
        let mut adj = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                adj[(i, j)] = self.adj_norm[(perm[i], perm[j])];
            }
        }
        PropGraph {
            adj_norm: adj,
            features: self.features.permute_rows(perm),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdjacencyMode {
    /// `D^-1/2 (max(A, Aᵀ) + I) D^-1/2`
    #[default]
    UndirectedSymNorm,
    /// Row-normalized `A + I`, keeping edge direction.
    DirectedRowNorm,
}

/// Binary adjacency with `a[s][t] = 1` for every edge `(s, t)`.
pub fn build_adjacency(edges: &[(usize, usize)], n: usize) -> Result<Matrix> {
    let mut a = Matrix::zeros(n, n);
    for &(s, t) in edges {
        if s >= n || t >= n {
            return Err(Error::InvalidEvent {
                id: String::new(),
                reason: format!("edge ({s}, {t}) outside 0..{n}"),
            });
        }
        a[(s, t)] = 1.0;
    }
    Ok(a)
}

pub fn normalize_adjacency(a: &Matrix, mode: AdjacencyMode) -> Matrix {
    let n = a.rows();
    assert_eq!(n, a.cols(), "adjacency must be square");
    let mut m = Matrix::zeros(n, n);
    match mode {
        AdjacencyMode::UndirectedSymNorm => {
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = if i == j {
                        1.0
                    } else {
                        a[(i, j)].max(a[(j, i)])
                    };
                }
            }
            let inv_sqrt: Vec<f64> = (0..n)
                .map(|i| 1.0 / m.row(i).iter().sum::<f64>().sqrt())
                .collect();
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
                }
            }
        }
        AdjacencyMode::DirectedRowNorm => {
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = if i == j { 1.0 } else { a[(i, j)] };
                }
                let deg: f64 = m.row(i).iter().sum();
                m.row_mut(i).iter_mut().for_each(|v| *v /= deg);
            }
        }
    }
    m
}

/// Uniformly random row permutation of `x`; returns the permuted matrix and
/// the permutation (`out[i] = x[perm[i]]`).
pub fn shuffle_features<R: Rng + ?Sized>(x: &Matrix, rng: &mut R) -> (Matrix, Vec<usize>) {
    let perm = random_permutation(x.rows(), rng);
    (x.permute_rows(&perm), perm)
}

pub fn random_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

pub fn to_prop_graph(event: &PropagationEvent, mode: AdjacencyMode) -> Result<PropGraph> {
    let a = build_adjacency(&event.edges, event.num_nodes()).map_err(|e| match e {
        Error::InvalidEvent { reason, .. } => Error::InvalidEvent {
            id: event.id.clone(),
            reason,
        },
        other => other,
    })?;
    Ok(PropGraph {
        adj_norm: normalize_adjacency(&a, mode),
        features: event.features.clone(),
    })
}
