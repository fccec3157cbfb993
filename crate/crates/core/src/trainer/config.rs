use super::{Result, TrainError};
use crate::models::ModelConfig;
use crate::tensor::AdamConfig;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub epochs: u32,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Target for real bars in the discriminator loss.
    pub label_smooth: f32,
    /// Stop after this many iterations even if epochs remain.
    pub max_iterations: Option<u64>,
    /// Write a checkpoint every this many iterations.
    pub checkpoint_every: Option<u64>,
}

impl TrainConfig {
    pub fn new(model: ModelConfig) -> Self {
        TrainConfig {
            model,
            epochs: 20,
            batch_size: 64,
            seed: 0,
            adam: AdamConfig::default(),
            label_smooth: 0.9,
            max_iterations: None,
            checkpoint_every: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.label_smooth > 0.5 && self.label_smooth <= 1.0) {
            return Err(TrainError::Contract(format!(
                "label_smooth {} outside (0.5, 1]",
                self.label_smooth
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(TrainError::Contract("batch size and epochs must be positive".into()));
        }
        if self.checkpoint_every == Some(0) {
            return Err(TrainError::Contract("checkpoint cadence must be positive".into()));
        }
        let a = &self.adam;
        if !(a.lr > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return Err(TrainError::Contract(format!("bad optimizer settings {a:?}")));
        }
        Ok(())
    }
}
