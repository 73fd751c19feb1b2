//! Embedding mean/covariance statistics and the alignment penalty between
//! training-set and test-graph statistics.

use serde::{Deserialize, Serialize};

use super::forward::forward_shared;
use super::TardParams;
use crate::graph::PropGraph;
use crate::nn::Matrix;
use crate::{Error, Result};

/// Mean vector and population covariance of a set of node embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingStats {
    pub mu: Vec<f64>,
    pub eta: Matrix,
    pub count: usize,
}

impl EmbeddingStats {
    /// Statistics over the rows of `h`.
    pub fn from_embeddings(h: &Matrix) -> Result<Self> {
        Self::pooled(std::iter::once(h))
    }

    /// Statistics over the rows of every matrix in `blocks`, pooled.
    pub fn pooled<'a>(blocks: impl IntoIterator<Item = &'a Matrix> + Clone) -> Result<Self> {
        let mut count = 0usize;
        let mut dim = None;
        let mut sum: Vec<f64> = Vec::new();
        for h in blocks.clone() {
            match dim {
                None => {
                    dim = Some(h.cols());
                    sum = vec![0.0; h.cols()];
                }
                Some(d) if d != h.cols() => {
                    return Err(Error::dim(
                        "embedding stats",
                        format!("{d} vs {} columns", h.cols()),
                    ))
                }
                _ => {}
            }
            for i in 0..h.rows() {
                for (s, v) in sum.iter_mut().zip(h.row(i)) {
                    *s += v;
                }
            }
            count += h.rows();
        }
        let d = dim.ok_or(Error::Empty("embedding collection"))?;
        if count == 0 {
            return Err(Error::Empty("embedding collection"));
        }
        let n = count as f64;
        let mu: Vec<f64> = sum.iter().map(|s| s / n).collect();

        let mut eta = Matrix::zeros(d, d);
        let mut centered = vec![0.0; d];
        for h in blocks {
            for i in 0..h.rows() {
                for ((c, v), m) in centered.iter_mut().zip(h.row(i)).zip(&mu) {
                    *c = v - m;
                }
                for a in 0..d {
                    for b in a..d {
                        eta[(a, b)] += centered[a] * centered[b];
                    }
                }
            }
        }
        for a in 0..d {
            for b in a..d {
                let v = eta[(a, b)] / n;
                eta[(a, b)] = v;
                eta[(b, a)] = v;
            }
        }
        Ok(EmbeddingStats { mu, eta, count })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// Pools the shared-extractor embeddings of every node in `graphs`.
pub fn compute_embedding_stats(
    graphs: &[PropGraph],
    params: &TardParams,
) -> Result<EmbeddingStats> {
    if graphs.is_empty() {
        return Err(Error::Empty("graph collection"));
    }
    let embeddings = graphs
        .iter()
        .map(|g| forward_shared(g, params).map(|f| f.embeddings))
        .collect::<Result<Vec<_>>>()?;
    EmbeddingStats::pooled(&embeddings)
}

/// `‖μ − μₜ‖² + ‖η − ηₜ‖²_F`. The covariance term is dropped when the test
/// side covers a single node.
pub fn stats_distance(train: &EmbeddingStats, test: &EmbeddingStats) -> Result<f64> {
    if train.dim() != test.dim() {
        return Err(Error::dim(
            "constraint_loss",
            format!("{} vs {}", train.dim(), test.dim()),
        ));
    }
    let mean_term: f64 = train
        .mu
        .iter()
        .zip(&test.mu)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if test.count < 2 {
        return Ok(mean_term);
    }
    Ok(mean_term + train.eta.sub(&test.eta).frobenius_sq())
}

#[derive(Debug, Clone)]
pub struct ConstraintLoss {
    pub loss: f64,
    pub test_stats: EmbeddingStats,
    /// Gradient with respect to the test-graph node embeddings.
    pub grad_embeddings: Matrix,
}

/// Alignment penalty between fixed training statistics and the statistics of
/// `embeddings`, differentiated through the test-side mean and covariance.
pub fn constraint_loss(train: &EmbeddingStats, embeddings: &Matrix) -> Result<ConstraintLoss> {
    let test_stats = EmbeddingStats::from_embeddings(embeddings)?;
    let loss = stats_distance(train, &test_stats)?;
    let (n, d) = embeddings.shape();
    let inv_n = 1.0 / n as f64;

    // ∂/∂μₜ = 2(μₜ − μ), spread evenly over the rows.
    let d_mu: Vec<f64> = test_stats
        .mu
        .iter()
        .zip(&train.mu)
        .map(|(t, s)| 2.0 * (t - s) * inv_n)
        .collect();
    let mut grad = Matrix::zeros(n, d);
    for i in 0..n {
        grad.row_mut(i).copy_from_slice(&d_mu);
    }
    if test_stats.count >= 2 {
        // ∂/∂ηₜ = 2(ηₜ − η) =: G;  ∂/∂E = (2/N)(E − 1μₜᵀ)G. The centering
        // correction vanishes because the centered rows sum to zero.
        let g = test_stats.eta.sub(&train.eta).scale(2.0);
        let mut centered = embeddings.clone();
        for i in 0..n {
            for (c, m) in centered.row_mut(i).iter_mut().zip(&test_stats.mu) {
                *c -= m;
            }
        }
        grad.add_scaled(&centered.matmul(&g), 2.0 * inv_n);
    }
    Ok(ConstraintLoss {
        loss,
        test_stats,
        grad_embeddings: grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::relative_error;

    #[test]
    fn identical_rows_have_zero_covariance() {
        let h = Matrix::from_rows(&[[1.5, -2.0], [1.5, -2.0], [1.5, -2.0]]);
        let s = EmbeddingStats::from_embeddings(&h).unwrap();
        assert_eq!(s.mu, vec![1.5, -2.0]);
        assert_eq!(s.eta, Matrix::zeros(2, 2));
        assert_eq!(s.count, 3);
    }

    #[test]
    fn two_point_population_covariance() {
        let h = Matrix::from_rows(&[[0.0, 0.0], [2.0, 2.0]]);
        let s = EmbeddingStats::from_embeddings(&h).unwrap();
        assert_eq!(s.mu, vec![1.0, 1.0]);
        assert_eq!(s.eta, Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]));
    }

    #[test]
    fn pooling_is_order_invariant() {
        let a = Matrix::from_rows(&[[0.1, 0.7], [1.3, -0.2]]);
        let b = Matrix::from_rows(&[[2.0, 0.4], [-0.3, 0.9], [0.5, 0.5]]);
        let ab = EmbeddingStats::pooled([&a, &b]).unwrap();
        let ba = EmbeddingStats::pooled([&b, &a]).unwrap();
        assert_eq!(ab.count, 5);
        for (x, y) in ab.mu.iter().zip(&ba.mu) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(ab.eta.sub(&ba.eta).max_abs() < 1e-12);
    }

    #[test]
    fn empty_collections_are_rejected() {
        assert!(EmbeddingStats::pooled(std::iter::empty::<&Matrix>()).is_err());
        assert!(EmbeddingStats::from_embeddings(&Matrix::zeros(0, 2)).is_err());
    }

    #[test]
    fn distance_values() {
        let s =
            EmbeddingStats::from_embeddings(&Matrix::from_rows(&[[0.0, 1.0], [2.0, 3.0]])).unwrap();
        assert_eq!(stats_distance(&s, &s).unwrap(), 0.0);
        let mut shifted = s.clone();
        shifted.mu[0] += 1.0;
        assert_eq!(stats_distance(&s, &shifted).unwrap(), 1.0);
        let other = EmbeddingStats::from_embeddings(&Matrix::zeros(2, 3)).unwrap();
        assert!(stats_distance(&s, &other).is_err());
    }

    #[test]
    fn single_node_uses_mean_term_only() {
        let train =
            EmbeddingStats::from_embeddings(&Matrix::from_rows(&[[0.0, 0.0], [2.0, 2.0]])).unwrap();
        let out = constraint_loss(&train, &Matrix::from_rows(&[[1.0, 3.0]])).unwrap();
        assert_eq!(out.loss, 4.0);
        assert_eq!(out.grad_embeddings, Matrix::from_rows(&[[0.0, 4.0]]));
    }

    #[test]
    fn constraint_gradient_matches_finite_differences() {
        let train = EmbeddingStats::from_embeddings(&Matrix::from_rows(&[
            [0.2, 1.1, -0.3],
            [1.4, 0.1, 0.8],
            [-0.5, 0.6, 0.2],
            [0.9, -1.2, 1.5],
            [0.0, 0.3, -0.7],
        ]))
        .unwrap();
        let e = Matrix::from_rows(&[
            [1.0, -0.4, 0.3],
            [0.2, 0.9, -1.1],
            [-0.7, 0.5, 0.6],
            [0.4, 0.0, 2.0],
        ]);
        let out = constraint_loss(&train, &e).unwrap();
        let step = 1e-5;
        for idx in 0..e.as_slice().len() {
            let mut p = e.clone();
            p.as_mut_slice()[idx] += step;
            let mut m = e.clone();
            m.as_mut_slice()[idx] -= step;
            let fd = (constraint_loss(&train, &p).unwrap().loss
                - constraint_loss(&train, &m).unwrap().loss)
                / (2.0 * step);
            let err = relative_error(out.grad_embeddings.as_slice()[idx], fd);
            assert!(err < 1e-5, "entry {idx}: {err}");
        }
    }
}
