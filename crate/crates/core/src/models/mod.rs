//! Generator, discriminator and conditioner networks plus the three model
//! variants.
//!
//! Networks are plain [`ParamSet`](crate::tensor::ParamSet)s; forward passes
//! take the parameters as tape variables so that the same code serves
//! training (trainable leaves) and inference (constants).

mod nets;
mod variant;

pub use nets::{
    conditioner_forward, discriminator_forward, generator_forward, init_conditioner, init_discriminator,
    init_generator, monophonize, DiscriminatorOutput, GeneratorTrace, Networks, INIT_STD,
};
pub use variant::{Architecture, ModelConfig, ModelVariant, MonoMode, NOISE_DIM};

use crate::tensor::TensorError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("unknown model variant {0} (expected 1, 2 or 3)")]
    UnknownVariant(u8),
    #[error("{0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;
