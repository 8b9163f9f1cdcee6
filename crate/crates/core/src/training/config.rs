use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::AttributeTree;
use crate::error::{config_err, Result};
use crate::signal::AdamConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Utterances per optimizer step.
    pub batch_size: usize,
    pub seed: u64,
    /// Probabilities are clamped to `[eps, 1 − eps]` inside the loss.
    pub clamp_epsilon: f64,
    pub adam: AdamConfig,
    /// Fresh starts allowed when the framing block saturates (see
    /// [`crate::training::COLLAPSE_FRACTION`]).
    pub max_restarts: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 4,
            seed: 0,
            clamp_epsilon: 1e-7,
            adam: AdamConfig::default(),
            max_restarts: 4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(config_err!("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(config_err!("batch size must be at least 1"));
        }
        if !(self.clamp_epsilon > 0.0 && self.clamp_epsilon < 0.1) {
            return Err(config_err!("clamp epsilon {} outside (0, 0.1)", self.clamp_epsilon));
        }
        let a = &self.adam;
        if !(a.learning_rate >= 0.0 && a.learning_rate.is_finite()) {
            return Err(config_err!("learning rate {} must be finite and non-negative", a.learning_rate));
        }
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2)) {
            return Err(config_err!("Adam betas ({}, {}) outside [0, 1)", a.beta1, a.beta2));
        }
        if !(a.epsilon > 0.0) {
            return Err(config_err!("Adam epsilon must be positive"));
        }
        Ok(())
    }
}

/// Training settings file. Plain `key = value` lines (TOML); every key is
/// optional:
///
/// ```text
/// lr = 0.001        # Adam step size
/// epochs = 30
/// batch = 4         # utterances per step
/// seed = 0
/// eps = 1e-7        # loss clamp
/// beta1 = 0.9
/// beta2 = 0.999
/// adam_eps = 1e-8
/// tree = 2          # WEVAD attribute tree: 2 (A, B) or 6 (A, A/hi, A/lo, B, B/hi, B/lo)
/// restarts = 4      # fresh starts allowed after a saturated framing block
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub lr: f32,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub eps: f64,
    pub beta1: f32,
    pub beta2: f32,
    pub adam_eps: f32,
    pub tree: usize,
    pub restarts: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let c = TrainConfig::default();
        Self {
            lr: c.adam.learning_rate,
            epochs: c.epochs,
            batch: c.batch_size,
            seed: c.seed,
            eps: c.clamp_epsilon,
            beta1: c.adam.beta1,
            beta2: c.adam.beta2,
            adam_eps: c.adam.epsilon,
            tree: 2,
            restarts: c.max_restarts,
        }
    }
}

impl TrainSettings {
    pub fn parse(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text).map_err(|e| config_err!("training settings: {}", e.message()))?;
        s.train_config().validate()?;
        s.tree()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch,
            seed: self.seed,
            clamp_epsilon: self.eps,
            adam: AdamConfig {
                learning_rate: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.adam_eps,
            },
            max_restarts: self.restarts,
        }
    }

    pub fn tree(&self) -> Result<AttributeTree> {
        match self.tree {
            2 => Ok(AttributeTree::two_node()),
            6 => Ok(AttributeTree::six_node()),
            n => Err(config_err!("unsupported tree size {n}; use 2 or 6")),
        }
    }

    /// The settings as they would be written to a file.
    pub fn render(&self) -> String {
        toml::to_string(self).expect("plain fields serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn defaults_and_overrides() {
        let s = TrainSettings::parse("").unwrap();
        assert_eq!(s.train_config(), TrainConfig::default());
        let s = TrainSettings::parse("lr = 0.01\nepochs = 5\nbatch = 2\nseed = 9\ntree = 6\n").unwrap();
        let c = s.train_config();
        assert_eq!((c.adam.learning_rate, c.epochs, c.batch_size, c.seed), (0.01, 5, 2, 9));
        assert_eq!(s.tree().unwrap().node_count(), 6);
        assert_eq!(TrainSettings::parse(&s.render()).unwrap(), s);
    }

    #[test]
    fn rejects_bad_settings() {
        for bad in ["epochs = 0", "eps = 0.5", "tree = 3", "learning_rate = 1", "lr = -1.0", "batch = 0"] {
            assert!(matches!(TrainSettings::parse(bad), Err(Error::Config(_))), "{bad}");
        }
    }
}
