use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netcore::{NetworkGrad, NetworkSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// All trainable parameters of `net`, layer by layer, weight then bias.
pub fn flat_params(net: &NetworkSpec) -> Vec<f64> {
    net.layers
        .iter()
        .filter_map(|l| l.params())
        .flat_map(|(w, b)| w.data().iter().chain(b.data()).copied())
        .collect()
}

/// Inverse of [`flat_params`].
pub fn set_flat_params(net: &mut NetworkSpec, values: &[f64]) -> Result<()> {
    let expected = flat_params(net).len();
    if values.len() != expected {
        return Err(Error::InvalidConfig(format!(
            "parameter vector has {} entries, network has {expected}",
            values.len()
        )));
    }
    let mut it = values.iter();
    for layer in &mut net.layers {
        if let Some((w, b)) = layer.params_mut() {
            for v in w.data_mut().iter_mut().chain(b.data_mut()) {
                *v = *it.next().expect("length checked");
            }
        }
    }
    Ok(())
}

/// Gradient-descent optimizer over one network's flattened parameters.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Self {
            kind,
            learning_rate,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    /// Applies one descent step along `grad`.
    pub fn step(&mut self, net: &mut NetworkSpec, grad: &NetworkGrad) -> Result<()> {
        let g = grad.flatten();
        let mut p = flat_params(net);
        if g.len() != p.len() {
            return Err(Error::InvalidConfig(format!(
                "gradient has {} entries, network has {}",
                g.len(),
                p.len()
            )));
        }
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (pi, gi) in p.iter_mut().zip(&g) {
                    *pi -= lr * gi;
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                if self.m.is_empty() {
                    self.m = vec![0.0; p.len()];
                    self.v = vec![0.0; p.len()];
                }
                self.t += 1;
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                for i in 0..p.len() {
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g[i];
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g[i] * g[i];
                    let m_hat = self.m[i] / c1;
                    let v_hat = self.v[i] / c2;
                    p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
        set_flat_params(net, &p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gymkit::init::{random_mlp, MlpArch};
    use crate::netcore::Role;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net() -> NetworkSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        random_mlp(&MlpArch::leaky(3, vec![4], 2, 0.2), Role::Generator, 0.1, &mut rng).unwrap()
    }

    #[test]
    fn flat_params_round_trip() {
        let mut n = net();
        let p = flat_params(&n);
        assert_eq!(p.len(), 3 * 4 + 4 + 4 * 2 + 2);
        let doubled: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
        set_flat_params(&mut n, &doubled).unwrap();
        assert_eq!(flat_params(&n), doubled);
        assert!(set_flat_params(&mut n, &[1.0]).is_err());
    }

    #[test]
    fn sgd_moves_against_gradient() {
        let mut n = net();
        let before = flat_params(&n);
        let mut g = NetworkGrad::zeros_like(&n);
        g.layers[0].as_mut().unwrap().weight[0] = 2.0;
        Optimizer::new(OptimizerKind::Sgd, 0.5).step(&mut n, &g).unwrap();
        let after = flat_params(&n);
        assert_eq!(after[0], before[0] - 1.0);
        assert_eq!(&after[1..], &before[1..]);
    }

    #[test]
    fn adam_first_step_has_learning_rate_magnitude() {
        let mut n = net();
        let before = flat_params(&n);
        let mut g = NetworkGrad::zeros_like(&n);
        g.layers[1].as_mut().unwrap().bias[1] = -3.0;
        Optimizer::new(OptimizerKind::adam(), 0.01).step(&mut n, &g).unwrap();
        let after = flat_params(&n);
        let last = after.len() - 1;
        assert!((after[last] - before[last] - 0.01).abs() < 1e-9);
    }
}
