use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 0.1, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First and second moment estimates with bias correction.
#[derive(Debug, Clone)]
pub struct AdamState {
    config: AdamConfig,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: u64,
}

impl AdamState {
    pub fn new(dim: usize, config: AdamConfig) -> Self {
        Self { config, first: vec![0.0; dim], second: vec![0.0; dim], steps: 0 }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update to `theta` in place. The state is left untouched
    /// when the gradient is rejected.
    pub fn step(&mut self, theta: &mut [f64], gradient: &[f64]) -> Result<()> {
        if theta.len() != self.first.len() {
            return Err(Error::DimensionMismatch { expected: self.first.len(), found: theta.len() });
        }
        if gradient.len() != self.first.len() {
            return Err(Error::DimensionMismatch { expected: self.first.len(), found: gradient.len() });
        }
        if let Some(bad) = gradient.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient component {bad}")));
        }
        let AdamConfig { learning_rate, beta1, beta2, epsilon } = self.config;
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((x, g), m), v) in theta.iter_mut().zip(gradient).zip(&mut self.first).zip(&mut self.second) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *x -= learning_rate * (*m / c1) / ((*v / c2).sqrt() + epsilon);
        }
        Ok(())
    }
}
