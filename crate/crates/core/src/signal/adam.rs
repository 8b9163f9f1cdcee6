use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment buffers for a fixed list of parameter tensors.
#[derive(Clone, Debug)]
pub struct AdamState {
    config: AdamConfig,
    step: u64,
    first: Vec<Vec<f32>>,
    second: Vec<Vec<f32>>,
}

impl AdamState {
    /// `sizes[j]` is the element count of the j-th parameter tensor.
    pub fn new(config: AdamConfig, sizes: &[usize]) -> Self {
        Self {
            config,
            step: 0,
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of every tensor in `params`.
    pub fn step(&mut self, params: &mut [&mut [f32]], grads: &[&[f32]]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(config_err!(
                "optimizer tracks {} tensors, got {} parameters and {} gradients",
                self.first.len(),
                params.len(),
                grads.len()
            ));
        }
        for (j, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.first[j].len() || g.len() != self.first[j].len() {
                return Err(config_err!(
                    "tensor {j}: expected {} values, got {} parameters and {} gradients",
                    self.first[j].len(),
                    p.len(),
                    g.len()
                ));
            }
        }

        self.step += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        let t = self.step as i32;
        let c1 = (1.0 - (b1 as f64).powi(t)) as f32;
        let c2 = (1.0 - (b2 as f64).powi(t)) as f32;

        for (j, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.first[j], &mut self.second[j]);
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut state = AdamState::new(AdamConfig::default(), &[3]);
        let mut p = vec![0.5f32, -1.0, 2.0];
        state.step(&mut [&mut p], &[&[0.0; 3]]).unwrap();
        assert_eq!(p, vec![0.5, -1.0, 2.0]);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let cfg = AdamConfig {
            learning_rate: 0.1,
            ..AdamConfig::default()
        };
        let mut state = AdamState::new(cfg, &[1]);
        let mut p = vec![1.0f32];
        state.step(&mut [&mut p], &[&[1.0]]).unwrap();
        // m̂ = v̂ = 1, so the step is lr / (1 + ε).
        let expected = 1.0 - 0.1 / (1.0 + 1e-8);
        assert!((p[0] as f64 - expected).abs() < 1e-6, "{}", p[0]);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut state = AdamState::new(AdamConfig::default(), &[4]);
            let mut p = vec![0.1f32, 0.2, 0.3, 0.4];
            for k in 0..50 {
                let g: Vec<f32> = p.iter().map(|x| x * (k as f32).sin()).collect();
                state.step(&mut [&mut p], &[&g]).unwrap();
            }
            p
        };
        let (a, b) = (run(), run());
        assert_eq!(
            a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn shape_mismatch() {
        let mut state = AdamState::new(AdamConfig::default(), &[2]);
        let mut p = vec![0.0f32; 3];
        assert!(state.step(&mut [&mut p], &[&[0.0; 3]]).is_err());
        assert_eq!(state.step_count(), 0);
    }
}
