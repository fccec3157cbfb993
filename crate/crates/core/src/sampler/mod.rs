//! Bar-by-bar melody generation: each bar is generated from fresh noise,
//! its chord and the conditioner's view of the bar before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{BarRoll, ChordVec};
use crate::models::{monophonize, ModelError, Networks};
use crate::trainer::noise;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SampleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Request(String),
}

pub type Result<T> = std::result::Result<T, SampleError>;

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationRequest {
    /// Real first bar; counts toward `n_bars`.
    pub primer: Option<BarRoll>,
    /// One chord per bar, including the primer's.
    pub chords: Option<Vec<ChordVec>>,
    pub n_bars: usize,
    pub seed: u64,
}

/// Generated bars plus what the generator was conditioned on.
#[derive(Clone, Debug, PartialEq)]
pub struct Generation {
    pub bars: Vec<BarRoll>,
    /// `conditions[k]` is the previous-bar condition used for bar `k`, or
    /// `None` when bar `k` is the primer.
    pub conditions: Vec<Option<BarRoll>>,
}

impl GenerationRequest {
    fn validate(&self, nets: &Networks) -> Result<()> {
        let v = &nets.config.variant;
        if self.n_bars == 0 {
            return Err(SampleError::Request("n_bars must be at least 1".into()));
        }
        match (&self.chords, v.use_chord) {
            (Some(c), true) if c.len() != self.n_bars => Err(SampleError::Request(format!(
                "{} chords given for {} bars",
                c.len(),
                self.n_bars
            ))),
            (Some(_), false) => Err(SampleError::Request(format!("variant {} does not take chords", v.id))),
            (None, true) => Err(SampleError::Request(format!(
                "variant {} needs one chord per bar",
                v.id
            ))),
            _ => Ok(()),
        }
    }
}

/// Generate `req.n_bars` bars. Bar 1 is the primer if given, otherwise it
/// is generated from an all-zero previous bar; every later bar is
/// conditioned on the bar just emitted. Parameters are not modified.
pub fn generate_sequence(nets: &Networks, req: &GenerationRequest) -> Result<Generation> {
    req.validate(nets)?;
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let mut bars = Vec::with_capacity(req.n_bars);
    let mut conditions = Vec::with_capacity(req.n_bars);
    if let Some(p) = req.primer {
        bars.push(p);
        conditions.push(None);
    }
    while bars.len() < req.n_bars {
        let k = bars.len();
        let prev = bars.last().copied().unwrap_or(BarRoll::EMPTY);
        let z = noise(&mut rng, 1, nets.config.arch.noise_dim);
        let chord = req.chords.as_ref().map(|c| [c[k].to_f32()]);
        let prev_in = nets.config.variant.uses_prev().then_some([prev]);
        let act = nets.generate(&z, chord.as_ref().map(|c| &c[..]), prev_in.as_ref().map(|p| &p[..]))?;
        let bar = monophonize(&act)?[0];
        bars.push(bar);
        conditions.push(Some(prev));
    }
    Ok(Generation { bars, conditions })
}

/// Generation without a primer.
pub fn from_scratch(nets: &Networks, n_bars: usize, chords: Option<Vec<ChordVec>>, seed: u64) -> Result<Vec<BarRoll>> {
    let req = GenerationRequest {
        primer: None,
        chords,
        n_bars,
        seed,
    };
    Ok(generate_sequence(nets, &req)?.bars)
}
