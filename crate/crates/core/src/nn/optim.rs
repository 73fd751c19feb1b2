use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Matrix;

/// A named trainable matrix and its gradient buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: Matrix,
    #[serde(skip)]
    pub grad: Option<Matrix>,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        Parameter {
            name: name.into(),
            value,
            grad: None,
        }
    }

    pub fn zero_grad(&mut self) {
        let (r, c) = self.value.shape();
        match &mut self.grad {
            Some(g) => g.fill(0.0),
            None => self.grad = Some(Matrix::zeros(r, c)),
        }
    }

    pub fn grad(&self) -> Matrix {
        let (r, c) = self.value.shape();
        self.grad.clone().unwrap_or_else(|| Matrix::zeros(r, c))
    }

    pub fn set_grad(&mut self, grad: Matrix) {
        assert_eq!(
            grad.shape(),
            self.value.shape(),
            "gradient shape for {}",
            self.name
        );
        self.grad = Some(grad);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..AdamConfig::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 5e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
struct Moments {
    first: Matrix,
    second: Matrix,
}

/// Adam with bias correction. Moment buffers are keyed by parameter name and
/// created lazily, so only parameters handed to [`Adam::step`] are tracked.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    steps: u64,
    moments: BTreeMap<String, Moments>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            steps: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn config(&self) -> AdamConfig {
        self.config
    }

    /// Applies one update to every parameter in `params` that carries a
    /// gradient. Parameters without a gradient buffer are left alone.
    pub fn step<'a>(&mut self, params: impl IntoIterator<Item = &'a mut Parameter>) {
        self.steps += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.steps as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for p in params {
            let Some(grad) = p.grad.as_ref() else {
                continue;
            };
            let (r, c) = p.value.shape();
            let m = self
                .moments
                .entry(p.name.clone())
                .or_insert_with(|| Moments {
                    first: Matrix::zeros(r, c),
                    second: Matrix::zeros(r, c),
                });
            let values = p.value.as_mut_slice();
            let firsts = m.first.as_mut_slice();
            let seconds = m.second.as_mut_slice();
            for (((v, &g), m1), m2) in values
                .iter_mut()
                .zip(grad.as_slice())
                .zip(firsts.iter_mut())
                .zip(seconds.iter_mut())
            {
                *m1 = beta1 * *m1 + (1.0 - beta1) * g;
                *m2 = beta2 * *m2 + (1.0 - beta2) * g * g;
                let m_hat = *m1 / bc1;
                let v_hat = *m2 / bc2;
                *v -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_values() {
        let mut p = Parameter::new("w", Matrix::from_rows(&[[1.5, -2.0]]));
        p.zero_grad();
        let before = p.value.clone();
        let mut adam = Adam::new(AdamConfig::default());
        adam.step([&mut p]);
        adam.step([&mut p]);
        assert!(p.value.bit_eq(&before));
    }

    #[test]
    fn two_steps_match_hand_rolled_update() {
        let cfg = AdamConfig {
            lr: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        };
        let mut p = Parameter::new("x", Matrix::from_rows(&[[1.0]]));
        let mut adam = Adam::new(cfg);
        p.set_grad(Matrix::from_rows(&[[0.5]]));
        adam.step([&mut p]);
        p.set_grad(Matrix::from_rows(&[[-0.2]]));
        adam.step([&mut p]);

        // step 1: m=0.05, v=0.00025, m̂=0.5, v̂=0.25 → x = 1 - 0.1·0.5/(0.5+1e-8)
        let mut x = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
        // step 2: m=0.045-0.02=0.025, v=0.00024975+0.00004=0.00028975
        let m = 0.9 * 0.05 + 0.1 * -0.2;
        let v = 0.999 * 0.00025 + 0.001 * 0.04;
        let m_hat = m / (1.0 - 0.81);
        let v_hat = v / (1.0 - 0.999f64 * 0.999);
        x -= 0.1 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((p.value[(0, 0)] - x).abs() < 1e-15);
    }

    #[test]
    fn only_supplied_parameters_move() {
        let mut a = Parameter::new("a", Matrix::from_rows(&[[1.0]]));
        let mut b = Parameter::new("b", Matrix::from_rows(&[[2.0]]));
        a.set_grad(Matrix::from_rows(&[[1.0]]));
        b.set_grad(Matrix::from_rows(&[[1.0]]));
        let b_before = b.value.clone();
        let mut adam = Adam::new(AdamConfig::default());
        adam.step([&mut a]);
        assert!(b.value.bit_eq(&b_before));
        assert!(a.value[(0, 0)] < 1.0);
        assert_eq!(adam.steps(), 1);
    }
}
