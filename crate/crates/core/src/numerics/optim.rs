use super::tensor::ParamStore;
use crate::error::{CgflError, Result};

/// Adaptive moment estimation.
#[derive(Debug, Clone)]
pub struct Adam {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Result<Self> {
        Self::with_betas(learning_rate, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(learning_rate: f64, beta1: f64, beta2: f64, eps: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(CgflError::invalid(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        Ok(Self {
            learning_rate,
            beta1,
            beta2,
            eps,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update from the gradients held by `store`, then clears
    /// them. Parameters without a gradient are treated as having zero
    /// gradient.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        if self.first.is_empty() {
            self.first = store.iter().map(|(_, _, t)| vec![0.0; t.len()]).collect();
            self.second = self.first.clone();
        }
        if self.first.len() != store.len() {
            return Err(CgflError::invalid(format!(
                "optimizer tracks {} parameters, store has {}",
                self.first.len(),
                store.len()
            )));
        }
        for (t, m) in store.tensors_mut().zip(&self.first) {
            if m.len() != t.len() {
                return Err(CgflError::invalid(format!(
                    "moment buffer of length {} does not match parameter of length {}",
                    m.len(),
                    t.len()
                )));
            }
            if let Some(g) = t.grad() {
                if g.len() != t.len() {
                    return Err(CgflError::invalid("gradient shape mismatch"));
                }
            }
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((t, m), v) in store
            .tensors_mut()
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            if !t.requires_grad {
                continue;
            }
            let grad = match t.grad() {
                Some(g) => g.to_vec(),
                None => continue,
            };
            let data = t.data_mut();
            for i in 0..data.len() {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                data[i] -= self.learning_rate * mhat / (vhat.sqrt() + self.eps);
            }
            t.clear_grad();
        }
        Ok(())
    }
}
