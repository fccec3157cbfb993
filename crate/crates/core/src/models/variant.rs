use super::{ModelError, Result};

/// Length of the generator's input noise vector.
pub const NOISE_DIM: usize = 100;

/// Filter counts, condition placement and feature-matching weights of one
/// model variant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelVariant {
    pub id: u8,
    pub g_filters: usize,
    pub cond_filters: usize,
    /// `twod_layers[k - 1]` is set when generator layer `k` receives the
    /// previous-bar condition.
    pub twod_layers: [bool; 4],
    pub use_chord: bool,
    pub lambda1: f32,
    pub lambda2: f32,
}

impl ModelVariant {
    pub fn new(id: u8) -> Result<Self> {
        match id {
            1 => Ok(ModelVariant {
                id,
                g_filters: 256,
                cond_filters: 256,
                twod_layers: [true; 4],
                use_chord: false,
                lambda1: 0.1,
                lambda2: 1.0,
            }),
            2 => Ok(ModelVariant {
                id,
                g_filters: 128,
                cond_filters: 16,
                twod_layers: [false, false, false, true],
                use_chord: true,
                lambda1: 0.01,
                lambda2: 0.1,
            }),
            3 => Ok(ModelVariant {
                twod_layers: [true; 4],
                ..ModelVariant::new(2)?
            }),
            other => Err(ModelError::UnknownVariant(other)),
        }
    }

    /// Layers (1-based) that receive the previous-bar condition.
    pub fn twod_layer_list(&self) -> Vec<usize> {
        (1..=4).filter(|&k| self.twod_layers[k - 1]).collect()
    }

    pub fn uses_prev(&self) -> bool {
        self.twod_layers.iter().any(|&b| b)
    }
}

/// Layer sizes that do not vary between variants. [`Architecture::toy`]
/// shrinks them for finite-difference checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub noise_dim: usize,
    pub g_fc1: usize,
    /// Must be even; reshaped to `g_fc2 / 2` channels of `1×2`.
    pub g_fc2: usize,
    pub d_filters1: usize,
    pub d_filters2: usize,
    pub d_fc: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            noise_dim: NOISE_DIM,
            g_fc1: 1024,
            g_fc2: 512,
            d_filters1: 14,
            d_filters2: 77,
            d_fc: 1024,
        }
    }
}

impl Architecture {
    pub fn toy() -> Self {
        Architecture {
            noise_dim: 4,
            g_fc1: 6,
            g_fc2: 8,
            d_filters1: 3,
            d_filters2: 2,
            d_fc: 5,
        }
    }

    pub fn reshape_channels(&self) -> usize {
        self.g_fc2 / 2
    }
}

/// How the generator's output is turned monophonic while training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MonoMode {
    /// One-hot per column in the forward pass; gradient reaches only the
    /// retained cell.
    #[default]
    StraightThrough,
    /// Training sees raw activations; monophony is applied when sampling.
    SamplingOnly,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    pub variant: ModelVariant,
    pub arch: Architecture,
    pub mono: MonoMode,
    /// Feed the previous bar to the discriminator as an extra input channel.
    pub d_sees_prev: bool,
    /// Negative slope of the discriminator's leaky ReLUs.
    pub leak: f32,
}

impl ModelConfig {
    pub fn new(variant: ModelVariant) -> Self {
        ModelConfig {
            variant,
            arch: Architecture::default(),
            mono: MonoMode::default(),
            d_sees_prev: false,
            leak: 0.2,
        }
    }

    pub fn for_id(id: u8) -> Result<Self> {
        Ok(Self::new(ModelVariant::new(id)?))
    }

    pub fn validate(&self) -> Result<()> {
        let v = &self.variant;
        let a = &self.arch;
        let sizes = [
            v.g_filters,
            v.cond_filters,
            a.noise_dim,
            a.g_fc1,
            a.g_fc2,
            a.d_filters1,
            a.d_filters2,
            a.d_fc,
        ];
        if sizes.contains(&0) || !a.g_fc2.is_multiple_of(2) {
            return Err(ModelError::Contract(format!("invalid layer sizes {v:?} {a:?}")));
        }
        if !(v.lambda1 >= 0.0 && v.lambda2 >= 0.0) {
            return Err(ModelError::Contract(
                "feature-matching weights must be non-negative".into(),
            ));
        }
        if self.d_sees_prev && !v.uses_prev() {
            return Err(ModelError::Contract(
                "discriminator cannot see the previous bar in a variant without 2-D conditions".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.leak) {
            return Err(ModelError::Contract(format!("leak {} outside [0, 1)", self.leak)));
        }
        Ok(())
    }
}
