use super::{dot, Matrix};
use crate::{Error, Result};

/// Column-wise mean of node embeddings.
pub fn mean_readout(h: &Matrix) -> Result<Vec<f64>> {
    if h.rows() == 0 {
        return Err(Error::Empty("readout input"));
    }
    Ok(h.column_means())
}

/// Gradient of [`mean_readout`]: every row receives `upstream / N`.
pub fn mean_readout_backward(num_nodes: usize, upstream: &[f64]) -> Matrix {
    let n = num_nodes as f64;
    let row: Vec<f64> = upstream.iter().map(|g| g / n).collect();
    let mut out = Matrix::zeros(num_nodes, upstream.len());
    for i in 0..num_nodes {
        out.row_mut(i).copy_from_slice(&row);
    }
    out
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Bilinear-free discriminator `σ(h · g)`.
pub fn discriminator(h: &[f64], g: &[f64]) -> Result<f64> {
    if h.len() != g.len() {
        return Err(Error::dim(
            "discriminator",
            format!("{} vs {}", h.len(), g.len()),
        ));
    }
    Ok(sigmoid(dot(h, g)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn readout_of_identical_rows() {
        let v = [0.25, -3.0, 7.5];
        let h = Matrix::from_rows(&[v, v, v]);
        assert_eq!(mean_readout(&h).unwrap(), v.to_vec());
    }

    #[test]
    fn readout_midpoint() {
        let h = Matrix::from_rows(&[[0.0, 2.0], [2.0, 0.0]]);
        assert_eq!(mean_readout(&h).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn readout_backward_matches_finite_differences() {
        let h = Matrix::from_rows(&[[0.3, -1.2], [2.0, 0.7], [-0.4, 0.1]]);
        let up = [0.9, -1.7];
        let loss = |m: &Matrix| dot(&mean_readout(m).unwrap(), &up);
        let grad = mean_readout_backward(3, &up);
        let step = 1e-5;
        for i in 0..3 {
            for j in 0..2 {
                let mut plus = h.clone();
                plus[(i, j)] += step;
                let mut minus = h.clone();
                minus[(i, j)] -= step;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * step);
                assert!((fd - grad[(i, j)]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn discriminator_values() {
        assert_eq!(discriminator(&[0.0, 0.0], &[3.0, -1.0]).unwrap(), 0.5);
        assert_eq!(discriminator(&[3.0, -1.0], &[0.0, 0.0]).unwrap(), 0.5);
        let d = discriminator(&[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!((d - 0.880_797_077_977_882_3).abs() < 1e-12);
        let a = [0.3, -2.0, 1.1];
        let b = [1.5, 0.2, -0.6];
        assert_eq!(
            discriminator(&a, &b).unwrap(),
            discriminator(&b, &a).unwrap()
        );
        assert!(discriminator(&a, &[1.0]).is_err());
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert!(sigmoid(-30.0) > 0.0);
    }
}
