//! Scalar objectives of the model with gradients for every parameter.

use rand::Rng;

use super::forward::{
    backward_main, backward_shared, backward_ssl_heads, forward_main, forward_shared,
    forward_ssl_from, SslForward,
};
use super::stats::constraint_loss;
use super::{EmbeddingStats, Gradients, TardParams};
use crate::graph::{random_permutation, PropGraph};
use crate::nn::{contrastive_loss, mean_readout_backward, softmax_cross_entropy, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct LossGrads {
    pub loss: f64,
    pub grads: Gradients,
}

fn check_label(label: usize, params: &TardParams) -> Result<()> {
    let classes = params.dims().classes;
    if label >= classes {
        return Err(Error::InvalidLabel { label, classes });
    }
    Ok(())
}

/// Supervised cross-entropy of one graph. Only shared and classification
/// head gradients are populated.
pub fn main_loss(graph: &PropGraph, label: usize, params: &TardParams) -> Result<LossGrads> {
    check_label(label, params)?;
    let mut grads = Gradients::zeros_like(params);
    let shared = forward_shared(graph, params)?;
    let main = forward_main(&shared.embeddings, graph, params)?;
    let ce = softmax_cross_entropy(&Matrix::row_vector(&main.logits), &[label])?;
    let d_shared = backward_main(
        &main,
        graph.num_nodes(),
        ce.grad_logits.as_slice(),
        params,
        &mut grads,
    )?;
    backward_shared(&shared, d_shared, &mut grads)?;
    Ok(LossGrads {
        loss: ce.loss,
        grads,
    })
}

/// Contrastive loss of one graph against a freshly shuffled view. Only shared
/// and SSL head gradients are populated.
pub fn ssl_loss<R: Rng + ?Sized>(
    graph: &PropGraph,
    params: &TardParams,
    rng: &mut R,
) -> Result<LossGrads> {
    let perm = random_permutation(graph.num_nodes(), rng);
    ssl_loss_with_perm(graph, params, perm)
}

pub fn ssl_loss_with_perm(
    graph: &PropGraph,
    params: &TardParams,
    perm: Vec<usize>,
) -> Result<LossGrads> {
    let mut grads = Gradients::zeros_like(params);
    let shared = forward_shared(graph, params)?;
    let ssl = forward_ssl_from(graph, params, shared, perm)?;
    let (loss, d_pos, d_neg) = ssl_backward(&ssl, 1.0, params, &mut grads)?;
    backward_shared(&ssl.shared_pos, d_pos, &mut grads)?;
    backward_shared(&ssl.shared_neg, d_neg, &mut grads)?;
    Ok(LossGrads { loss, grads })
}

/// Evaluates the contrastive loss and backpropagates `scale ·` its gradient
/// through the SSL head. Returns the loss and the shared-extractor upstream
/// gradients for both views.
fn ssl_backward(
    ssl: &SslForward,
    scale: f64,
    params: &TardParams,
    grads: &mut Gradients,
) -> Result<(f64, Matrix, Matrix)> {
    let c = contrastive_loss(&ssl.h0, &ssl.h1, &ssl.g0)?;
    let n = ssl.h0.rows();
    let mut d_h0 = c.grad_pos;
    d_h0.add_assign(&mean_readout_backward(n, &c.grad_summary));
    let mut d_h1 = c.grad_neg;
    if scale != 1.0 {
        d_h0 = d_h0.scale(scale);
        d_h1 = d_h1.scale(scale);
    }
    let (d_pos, d_neg) = backward_ssl_heads(ssl, d_h0, d_h1, params, grads)?;
    Ok((c.loss, d_pos, d_neg))
}

fn ssl_value(ssl: &SslForward) -> Result<f64> {
    Ok(contrastive_loss(&ssl.h0, &ssl.h1, &ssl.g0)?.loss)
}

#[derive(Debug, Clone)]
pub struct JointLoss {
    pub main: f64,
    pub ssl: f64,
    /// `main + alpha1 · ssl`
    pub total: f64,
    pub grads: Gradients,
}

/// Training objective `L_m + α₁·L_s` for one labelled graph. With
/// `alpha1 == 0` the contrastive loss is still reported but contributes no
/// gradient, so the update equals a purely supervised one.
pub fn joint_loss(
    graph: &PropGraph,
    label: usize,
    params: &TardParams,
    alpha1: f64,
    perm: Vec<usize>,
) -> Result<JointLoss> {
    check_label(label, params)?;
    let mut grads = Gradients::zeros_like(params);
    let shared = forward_shared(graph, params)?;
    let main = forward_main(&shared.embeddings, graph, params)?;
    let ce = softmax_cross_entropy(&Matrix::row_vector(&main.logits), &[label])?;
    let mut d_shared = backward_main(
        &main,
        graph.num_nodes(),
        ce.grad_logits.as_slice(),
        params,
        &mut grads,
    )?;

    let ssl = forward_ssl_from(graph, params, shared, perm)?;
    let ssl_loss = if alpha1 == 0.0 {
        let value = ssl_value(&ssl)?;
        backward_shared(&ssl.shared_pos, d_shared, &mut grads)?;
        value
    } else {
        let (value, d_pos, d_neg) = ssl_backward(&ssl, alpha1, params, &mut grads)?;
        d_shared.add_assign(&d_pos);
        backward_shared(&ssl.shared_pos, d_shared, &mut grads)?;
        backward_shared(&ssl.shared_neg, d_neg, &mut grads)?;
        value
    };
    Ok(JointLoss {
        main: ce.loss,
        ssl: ssl_loss,
        total: ce.loss + alpha1 * ssl_loss,
        grads,
    })
}

#[derive(Debug, Clone)]
pub struct AdaptationLoss {
    pub ssl: f64,
    pub constraint: f64,
    /// `ssl + alpha2 · constraint`
    pub total: f64,
    pub grads: Gradients,
}

/// Test-time objective `L_s + α₂·L_c` on one unlabelled graph. Classification
/// head gradients stay zero.
pub fn adaptation_loss(
    graph: &PropGraph,
    params: &TardParams,
    train_stats: &EmbeddingStats,
    alpha2: f64,
    perm: Vec<usize>,
) -> Result<AdaptationLoss> {
    let mut grads = Gradients::zeros_like(params);
    let shared = forward_shared(graph, params)?;
    let ssl = forward_ssl_from(graph, params, shared, perm)?;
    let (ssl_loss, mut d_pos, d_neg) = ssl_backward(&ssl, 1.0, params, &mut grads)?;
    let c = constraint_loss(train_stats, &ssl.shared_pos.embeddings)?;
    if alpha2 != 0.0 {
        d_pos.add_scaled(&c.grad_embeddings, alpha2);
    }
    backward_shared(&ssl.shared_pos, d_pos, &mut grads)?;
    backward_shared(&ssl.shared_neg, d_neg, &mut grads)?;
    Ok(AdaptationLoss {
        ssl: ssl_loss,
        constraint: c.loss,
        total: ssl_loss + alpha2 * c.loss,
        grads,
    })
}
