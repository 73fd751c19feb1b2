//! Graph convolution `act(Â · H · W)` with a hand-derived backward pass.

use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

/// Everything `gcn_backward` needs. The normalized adjacency is held by copy;
/// graphs are small and dense.
#[derive(Debug, Clone)]
pub struct GcnCache {
    adj: Matrix,
    /// `Â · H`, reused for the weight gradient.
    agg: Matrix,
    weight: Matrix,
    pre: Matrix,
    activation: Activation,
}

impl GcnCache {
    pub fn pre_activation(&self) -> &Matrix {
        &self.pre
    }
}

pub fn gcn_forward(
    adj: &Matrix,
    h: &Matrix,
    w: &Matrix,
    activation: Activation,
) -> Result<(Matrix, GcnCache)> {
    if adj.rows() != adj.cols() || adj.cols() != h.rows() || h.cols() != w.rows() {
        return Err(Error::dim(
            "gcn_forward",
            format!(
                "adjacency {:?}, features {:?}, weight {:?}",
                adj.shape(),
                h.shape(),
                w.shape()
            ),
        ));
    }
    let agg = adj.matmul(h);
    let pre = agg.matmul(w);
    let out = match activation {
        Activation::Relu => pre.map(|v| v.max(0.0)),
        Activation::Identity => pre.clone(),
    };
    Ok((
        out,
        GcnCache {
            adj: adj.clone(),
            agg,
            weight: w.clone(),
            pre,
            activation,
        },
    ))
}

/// Returns `(∂L/∂H, ∂L/∂W)` given `∂L/∂out`. The adjacency is a constant.
pub fn gcn_backward(cache: &GcnCache, upstream: &Matrix) -> Result<(Matrix, Matrix)> {
    if upstream.shape() != cache.pre.shape() {
        return Err(Error::dim(
            "gcn_backward",
            format!(
                "upstream {:?} vs output {:?}",
                upstream.shape(),
                cache.pre.shape()
            ),
        ));
    }
    let d_pre = match cache.activation {
        Activation::Identity => upstream.clone(),
        Activation::Relu => {
            let mut d = upstream.clone();
            for (g, &z) in d.as_mut_slice().iter_mut().zip(cache.pre.as_slice()) {
                if z <= 0.0 {
                    *g = 0.0;
                }
            }
            d
        }
    };
    let grad_w = cache.agg.t_matmul(&d_pre);
    // ∂L/∂H = Âᵀ · dZ · Wᵀ
    let grad_h = cache.adj.t_matmul(&d_pre.matmul_t(&cache.weight));
    Ok((grad_h, grad_w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_node_passthrough() {
        let adj = Matrix::identity(1);
        let h = Matrix::from_rows(&[[2.0, 3.0]]);
        let (out, _) = gcn_forward(&adj, &h, &Matrix::identity(2), Activation::Identity).unwrap();
        assert_eq!(out, h);
    }

    #[test]
    fn two_node_average() {
        let adj = Matrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]);
        let h = Matrix::identity(2);
        let (out, _) = gcn_forward(&adj, &h, &Matrix::identity(2), Activation::Identity).unwrap();
        assert_eq!(out, Matrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]));
    }

    #[test]
    fn relu_output_nonnegative() {
        let adj = Matrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]);
        let h = Matrix::from_rows(&[[1.0, -4.0], [-2.0, 0.5]]);
        let w = Matrix::from_rows(&[[1.0, -1.0, 0.3], [0.2, 2.0, -0.7]]);
        let (out, _) = gcn_forward(&adj, &h, &w, Activation::Relu).unwrap();
        assert!(out.as_slice().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let adj = Matrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]);
        let h = Matrix::from_rows(&[[1.0, -4.0], [-2.0, 0.5]]);
        let w = Matrix::from_rows(&[[1.0, -1.0], [0.2, 2.0]]);
        let (_, cache) = gcn_forward(&adj, &h, &w, Activation::Relu).unwrap();
        let (gh, gw) = gcn_backward(&cache, &Matrix::zeros(2, 2)).unwrap();
        assert_eq!(gh.max_abs(), 0.0);
        assert_eq!(gw.max_abs(), 0.0);
    }

    #[test]
    fn single_node_weight_grad_is_outer_product() {
        let adj = Matrix::identity(1);
        let h = Matrix::from_rows(&[[2.0, -1.0]]);
        let w = Matrix::from_rows(&[[0.3, 0.1, 0.0], [1.0, -2.0, 0.5]]);
        let up = Matrix::from_rows(&[[1.0, 2.0, -3.0]]);
        let (_, cache) = gcn_forward(&adj, &h, &w, Activation::Identity).unwrap();
        let (gh, gw) = gcn_backward(&cache, &up).unwrap();
        assert_eq!(gw, h.transpose().matmul(&up));
        assert_eq!(gh, up.matmul(&w.transpose()));
    }

    #[test]
    fn shape_errors() {
        let adj = Matrix::identity(2);
        assert!(gcn_forward(
            &adj,
            &Matrix::zeros(3, 2),
            &Matrix::zeros(2, 2),
            Activation::Relu
        )
        .is_err());
        assert!(gcn_forward(
            &adj,
            &Matrix::zeros(2, 2),
            &Matrix::zeros(3, 2),
            Activation::Relu
        )
        .is_err());
        let (_, cache) = gcn_forward(
            &adj,
            &Matrix::zeros(2, 2),
            &Matrix::zeros(2, 2),
            Activation::Relu,
        )
        .unwrap();
        assert!(gcn_backward(&cache, &Matrix::zeros(2, 3)).is_err());
    }
}
