use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig};
use crate::error::{Error, Result};

/// First and second moment estimates, and the number of steps taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// One bias-corrected Adam update of `theta`.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], cfg: &ModelConfig) -> Result<()> {
        if theta.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::Dimension(format!(
                "Adam state for {} params, got {} params and {} grads",
                self.m.len(),
                theta.len(),
                grad.len()
            )));
        }
        self.t += 1;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        for (((p, &g), m), v) in theta.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= cfg.lr * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon);
        }
        Ok(())
    }

    /// Update `model` in place and mark older tapes stale.
    pub fn apply(&mut self, model: &mut Model, grad: &[f64]) -> Result<()> {
        let cfg = model.config.clone();
        self.step(&mut model.theta, grad, &cfg)?;
        model.version += 1;
        Ok(())
    }
}
