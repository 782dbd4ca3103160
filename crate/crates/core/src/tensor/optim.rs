use super::{Result, Tensor, TensorError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &[Tensor]) -> Self {
        Self {
            config,
            step: 0,
            m: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update using each parameter's stored gradient. Parameters
    /// without a gradient are treated as having zero gradient.
    pub fn step(&mut self, params: &mut [Tensor]) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(TensorError::Dimension {
                op: "adam_step",
                lhs: vec![params.len()],
                rhs: vec![self.m.len()],
            });
        }
        for (p, m) in params.iter().zip(&self.m) {
            if p.numel() != m.len() {
                return Err(TensorError::Dimension {
                    op: "adam_step",
                    lhs: p.shape().to_vec(),
                    rhs: vec![m.len()],
                });
            }
        }
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let Some(g) = p.grad().map(<[f64]>::to_vec) else {
                continue;
            };
            let data = p.data_mut();
            for i in 0..data.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                data[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
