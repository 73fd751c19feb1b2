//! Contrastive (discriminator) loss and softmax cross-entropy.

use super::readout::sigmoid;
use super::{dot, Matrix};
use crate::{Error, Result};

/// Lower clamp applied to every probability before taking its logarithm.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ContrastiveLoss {
    pub loss: f64,
    pub grad_pos: Matrix,
    pub grad_neg: Matrix,
    /// Gradient with respect to the summary vector, treated as a free input.
    pub grad_summary: Vec<f64>,
}

/// `−(1/2N) Σᵢ [log σ(posᵢ·g) + log(1 − σ(negᵢ·g))]`.
///
/// `pos` holds the node embeddings of the original view, `neg` those of the
/// shuffled view, and `summary` the graph readout they are scored against.
pub fn contrastive_loss(pos: &Matrix, neg: &Matrix, summary: &[f64]) -> Result<ContrastiveLoss> {
    if pos.shape() != neg.shape() || pos.cols() != summary.len() {
        return Err(Error::dim(
            "contrastive_loss",
            format!(
                "positive {:?}, negative {:?}, summary {}",
                pos.shape(),
                neg.shape(),
                summary.len()
            ),
        ));
    }
    let n = pos.rows();
    if n == 0 {
        return Err(Error::Empty("contrastive_loss input"));
    }
    let scale = 1.0 / (2.0 * n as f64);
    let mut loss = 0.0;
    // dL/d(score) per node and view
    let mut d_pos = vec![0.0; n];
    let mut d_neg = vec![0.0; n];
    for i in 0..n {
        let s = dot(pos.row(i), summary);
        let p = sigmoid(s);
        if p < LOG_FLOOR {
            loss -= LOG_FLOOR.ln();
        } else {
            loss -= p.ln();
            d_pos[i] = -scale * sigmoid(-s);
        }

        let s = dot(neg.row(i), summary);
        let q = sigmoid(-s);
        if q < LOG_FLOOR {
            loss -= LOG_FLOOR.ln();
        } else {
            loss -= q.ln();
            d_neg[i] = scale * sigmoid(s);
        }
    }
    loss *= scale;

    let d = summary.len();
    let mut grad_pos = Matrix::zeros(n, d);
    let mut grad_neg = Matrix::zeros(n, d);
    let mut grad_summary = vec![0.0; d];
    for i in 0..n {
        for k in 0..d {
            grad_pos[(i, k)] = d_pos[i] * summary[k];
            grad_neg[(i, k)] = d_neg[i] * summary[k];
            grad_summary[k] += d_pos[i] * pos[(i, k)] + d_neg[i] * neg[(i, k)];
        }
    }
    Ok(ContrastiveLoss {
        loss,
        grad_pos,
        grad_neg,
        grad_summary,
    })
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

#[derive(Debug, Clone)]
pub struct CrossEntropy {
    pub loss: f64,
    pub probs: Matrix,
    pub grad_logits: Matrix,
}

/// Mean cross-entropy of row-softmax(`logits`) against integer class labels.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<CrossEntropy> {
    let (b, c) = logits.shape();
    if labels.len() != b {
        return Err(Error::dim(
            "softmax_cross_entropy",
            format!("{b} rows of logits, {} labels", labels.len()),
        ));
    }
    if b == 0 {
        return Err(Error::Empty("softmax_cross_entropy batch"));
    }
    if let Some(&label) = labels.iter().find(|&&y| y >= c) {
        return Err(Error::InvalidLabel { label, classes: c });
    }
    let probs = softmax_rows(logits);
    let inv_b = 1.0 / b as f64;
    let mut loss = 0.0;
    let mut grad_logits = Matrix::zeros(b, c);
    for (k, &y) in labels.iter().enumerate() {
        let row = logits.row(k);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let log_p = row[y] - max - log_z;
        if log_p < LOG_FLOOR.ln() {
            loss -= LOG_FLOOR.ln();
            continue;
        }
        loss -= log_p;
        for j in 0..c {
            let target = if j == y { 1.0 } else { 0.0 };
            grad_logits[(k, j)] = (probs[(k, j)] - target) * inv_b;
        }
    }
    Ok(CrossEntropy {
        loss: loss * inv_b,
        probs,
        grad_logits,
    })
}
