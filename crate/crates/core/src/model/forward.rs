//! Forward passes of the three branches and their backward counterparts.

use rand::Rng;

use super::{Gradients, TardParams};
use crate::graph::{random_permutation, PropGraph};
use crate::nn::{
    gcn_backward, gcn_forward, mean_readout, mean_readout_backward, softmax_rows, Activation,
    GcnCache, Matrix,
};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SharedForward {
    /// `N × d_hidden` node embeddings.
    pub embeddings: Matrix,
    caches: Vec<GcnCache>,
}

pub fn forward_shared(graph: &PropGraph, params: &TardParams) -> Result<SharedForward> {
    forward_shared_on(&graph.adj_norm, &graph.features, params)
}

fn forward_shared_on(
    adj: &Matrix,
    features: &Matrix,
    params: &TardParams,
) -> Result<SharedForward> {
    let dims = params.dims();
    if features.cols() != dims.d_in {
        return Err(Error::dim(
            "forward_shared",
            format!(
                "feature dim {} but model expects {}",
                features.cols(),
                dims.d_in
            ),
        ));
    }
    let mut h = features.clone();
    let mut caches = Vec::with_capacity(dims.shared_layers);
    for i in 0..dims.shared_layers {
        let (out, cache) = gcn_forward(adj, &h, params.shared(i), Activation::Relu)?;
        caches.push(cache);
        h = out;
    }
    Ok(SharedForward {
        embeddings: h,
        caches,
    })
}

pub(crate) fn backward_shared(
    fwd: &SharedForward,
    upstream: Matrix,
    grads: &mut Gradients,
) -> Result<()> {
    let mut up = upstream;
    for (i, cache) in fwd.caches.iter().enumerate().rev() {
        let (gh, gw) = gcn_backward(cache, &up)?;
        grads.values[i].add_assign(&gw);
        up = gh;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct MainForward {
    pub probs: Vec<f64>,
    pub logits: Vec<f64>,
    pooled: Vec<f64>,
    caches: Vec<GcnCache>,
}

/// Classification head: GCN layers, mean readout, affine map, softmax.
pub fn forward_main(
    shared_h: &Matrix,
    graph: &PropGraph,
    params: &TardParams,
) -> Result<MainForward> {
    let dims = params.dims();
    if shared_h.cols() != dims.d_hidden || shared_h.rows() != graph.num_nodes() {
        return Err(Error::dim(
            "forward_main",
            format!(
                "embeddings {:?} for {} nodes, hidden width {}",
                shared_h.shape(),
                graph.num_nodes(),
                dims.d_hidden
            ),
        ));
    }
    let mut h = shared_h.clone();
    let mut caches = Vec::with_capacity(dims.main_layers);
    for i in 0..dims.main_layers {
        let (out, cache) = gcn_forward(&graph.adj_norm, &h, params.main(i), Activation::Relu)?;
        caches.push(cache);
        h = out;
    }
    let pooled = mean_readout(&h)?;
    let logits_m = Matrix::row_vector(&pooled)
        .matmul(params.out_w())
        .add(params.out_b());
    let probs = softmax_rows(&logits_m).into_vec();
    Ok(MainForward {
        probs,
        logits: logits_m.into_vec(),
        pooled,
        caches,
    })
}

/// Accumulates head gradients and returns `∂L/∂shared_h`.
pub(crate) fn backward_main(
    fwd: &MainForward,
    num_nodes: usize,
    grad_logits: &[f64],
    params: &TardParams,
    grads: &mut Gradients,
) -> Result<Matrix> {
    let dl = Matrix::row_vector(grad_logits);
    let wi = params.out_w_index();
    grads.values[wi].add_assign(&Matrix::row_vector(&fwd.pooled).t_matmul(&dl));
    grads.values[wi + 1].add_assign(&dl);
    let d_pooled = dl.matmul_t(params.out_w()).into_vec();
    let mut up = mean_readout_backward(num_nodes, &d_pooled);
    for (i, cache) in fwd.caches.iter().enumerate().rev() {
        let (gh, gw) = gcn_backward(cache, &up)?;
        grads.values[params.main_index(i)].add_assign(&gw);
        up = gh;
    }
    Ok(up)
}

/// Outputs of the contrastive branch on the original and the shuffled view.
#[derive(Debug, Clone)]
pub struct SslForward {
    /// SSL-head node embeddings of the original view.
    pub h0: Matrix,
    /// SSL-head node embeddings of the shuffled view.
    pub h1: Matrix,
    /// Mean readout of `h0`.
    pub g0: Vec<f64>,
    /// Row permutation that produced the shuffled features.
    pub perm: Vec<usize>,
    pub shared_pos: SharedForward,
    pub(crate) shared_neg: SharedForward,
    pos_caches: Vec<GcnCache>,
    neg_caches: Vec<GcnCache>,
}

pub fn forward_ssl<R: Rng + ?Sized>(
    graph: &PropGraph,
    params: &TardParams,
    rng: &mut R,
) -> Result<SslForward> {
    let perm = random_permutation(graph.num_nodes(), rng);
    forward_ssl_with_perm(graph, params, perm)
}

pub fn forward_ssl_with_perm(
    graph: &PropGraph,
    params: &TardParams,
    perm: Vec<usize>,
) -> Result<SslForward> {
    let shared_pos = forward_shared(graph, params)?;
    forward_ssl_from(graph, params, shared_pos, perm)
}

pub(crate) fn forward_ssl_from(
    graph: &PropGraph,
    params: &TardParams,
    shared_pos: SharedForward,
    perm: Vec<usize>,
) -> Result<SslForward> {
    if perm.len() != graph.num_nodes() {
        return Err(Error::dim(
            "forward_ssl",
            format!(
                "permutation of {} for {} nodes",
                perm.len(),
                graph.num_nodes()
            ),
        ));
    }
    let shuffled = graph.features.permute_rows(&perm);
    let shared_neg = forward_shared_on(&graph.adj_norm, &shuffled, params)?;
    let (h0, pos_caches) = ssl_head(&graph.adj_norm, &shared_pos.embeddings, params)?;
    let (h1, neg_caches) = ssl_head(&graph.adj_norm, &shared_neg.embeddings, params)?;
    let g0 = mean_readout(&h0)?;
    Ok(SslForward {
        h0,
        h1,
        g0,
        perm,
        shared_pos,
        shared_neg,
        pos_caches,
        neg_caches,
    })
}

/// Hidden SSL layers use relu, the last one is linear.
fn ssl_head(adj: &Matrix, h: &Matrix, params: &TardParams) -> Result<(Matrix, Vec<GcnCache>)> {
    let t = params.dims().ssl_layers;
    let mut h = h.clone();
    let mut caches = Vec::with_capacity(t);
    for i in 0..t {
        let act = if i + 1 == t {
            Activation::Identity
        } else {
            Activation::Relu
        };
        let (out, cache) = gcn_forward(adj, &h, params.ssl(i), act)?;
        caches.push(cache);
        h = out;
    }
    Ok((h, caches))
}

fn ssl_head_backward(
    caches: &[GcnCache],
    upstream: Matrix,
    params: &TardParams,
    grads: &mut Gradients,
) -> Result<Matrix> {
    let mut up = upstream;
    for (i, cache) in caches.iter().enumerate().rev() {
        let (gh, gw) = gcn_backward(cache, &up)?;
        grads.values[params.ssl_index(i)].add_assign(&gw);
        up = gh;
    }
    Ok(up)
}

/// Backpropagates contrastive-loss gradients through both SSL-head passes.
/// Returns the upstream gradients for the shared extractor on the original
/// and the shuffled view.
pub(crate) fn backward_ssl_heads(
    fwd: &SslForward,
    grad_h0: Matrix,
    grad_h1: Matrix,
    params: &TardParams,
    grads: &mut Gradients,
) -> Result<(Matrix, Matrix)> {
    let d_pos = ssl_head_backward(&fwd.pos_caches, grad_h0, params, grads)?;
    let d_neg = ssl_head_backward(&fwd.neg_caches, grad_h1, params, grads)?;
    Ok((d_pos, d_neg))
}

/// Class probabilities for one graph.
pub fn predict_proba(graph: &PropGraph, params: &TardParams) -> Result<Vec<f64>> {
    let shared = forward_shared(graph, params)?;
    Ok(forward_main(&shared.embeddings, graph, params)?.probs)
}
