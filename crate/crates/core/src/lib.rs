//! Bar-by-bar symbolic melody generation with a conditional convolutional GAN.
//!
//! A generator turns noise into one 128×16 piano-roll bar, optionally
//! conditioned on a chord (broadcast as extra channels) and on the previous
//! bar (encoded by a conditioner CNN whose feature maps are concatenated
//! into the generator's transposed-convolution layers).

pub mod cli;
pub mod dataset;
pub mod midi;
pub mod models;
pub mod sampler;
pub mod stats;
pub mod tensor;
pub mod trainer;
