use serde::{Deserialize, Serialize};

use crate::autograd::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Rescale gradients whose global L2 norm exceeds this.
    pub grad_clip: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
            weight_decay: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            grad_clip: None,
        }
    }
}

/// First-order optimizer with per-tensor state.
#[derive(Debug, Clone)]
pub struct Optimizer {
    cfg: OptimizerConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

pub fn global_norm(grads: &[Matrix]) -> f64 {
    grads
        .iter()
        .flat_map(|g| g.data.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig, shapes: &[Matrix]) -> Self {
        Optimizer {
            cfg,
            step: 0,
            m: shapes.iter().map(|s| vec![0.0; s.len()]).collect(),
            v: shapes.iter().map(|s| vec![0.0; s.len()]).collect(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update. A zero learning rate leaves `params` untouched.
    pub fn step(&mut self, params: &mut [Matrix], grads: &[Matrix]) {
        self.step += 1;
        let lr = self.cfg.learning_rate;
        let clip = match self.cfg.grad_clip {
            Some(max) => {
                let norm = global_norm(grads);
                if norm > max && norm > 0.0 {
                    max / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        let wd = self.cfg.weight_decay;
        let (b1, b2) = (self.cfg.beta1, self.cfg.beta2);
        let bc1 = 1.0 - b1.powi(self.step as i32);
        let bc2 = 1.0 - b2.powi(self.step as i32);
        for (t, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            for k in 0..p.data.len() {
                let grad = g.data[k] * clip + wd * p.data[k];
                let delta = match self.cfg.kind {
                    OptimizerKind::Sgd => grad,
                    OptimizerKind::Adam => {
                        let m = &mut self.m[t][k];
                        let v = &mut self.v[t][k];
                        *m = b1 * *m + (1.0 - b1) * grad;
                        *v = b2 * *v + (1.0 - b2) * grad * grad;
                        (*m / bc1) / ((*v / bc2).sqrt() + self.cfg.eps)
                    }
                };
                if lr != 0.0 {
                    p.data[k] -= lr * delta;
                }
            }
        }
    }
}
