//! Adam optimizer over flat parameter tensors.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub bias_correction: bool,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            bias_correction: true,
        }
    }
}

/// First/second moment accumulators, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    config: AdamConfig,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
    timestep: u64,
}

impl AdamState {
    /// `shapes` gives the element count of each parameter tensor.
    pub fn new(config: AdamConfig, shapes: &[usize]) -> Self {
        Self {
            config,
            first_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            timestep: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn timestep(&self) -> u64 {
        self.timestep
    }

    /// Applies one update. `params[i]` and `grads[i]` must match the i-th shape.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(params.len(), self.first_moment.len(), "tensor count mismatch");
        assert_eq!(grads.len(), self.first_moment.len(), "tensor count mismatch");
        self.timestep += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            bias_correction,
        } = self.config;
        let t = self.timestep as i32;
        let (c1, c2) = if bias_correction {
            (1.0 - beta1.powi(t), 1.0 - beta2.powi(t))
        } else {
            (1.0, 1.0)
        };
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            assert_eq!(p.len(), g.len(), "parameter/gradient length mismatch");
            for (((pi, &gi), mi), vi) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *pi -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestep_increments() {
        let mut adam = AdamState::new(AdamConfig::default(), &[2]);
        let mut p = [0.0, 0.0];
        adam.step(&mut [&mut p], &[&[1.0, -1.0]]);
        adam.step(&mut [&mut p], &[&[1.0, -1.0]]);
        assert_eq!(adam.timestep(), 2);
        // First bias-corrected step moves each parameter by ~lr against the gradient sign.
        assert!(p[0] < 0.0 && p[1] > 0.0);
    }

    #[test]
    fn minimizes_quadratic() {
        let cfg = AdamConfig {
            learning_rate: 0.05,
            ..Default::default()
        };
        let mut adam = AdamState::new(cfg, &[1]);
        let mut x = [3.0];
        for _ in 0..2000 {
            let g = [2.0 * (x[0] - 1.0)];
            adam.step(&mut [&mut x], &[&g]);
        }
        assert!((x[0] - 1.0).abs() < 1e-3, "{}", x[0]);
    }
}
