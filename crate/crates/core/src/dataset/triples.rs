use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{BarGroup, BarRoll, ChordVec, DatasetError};

/// A real bar, the bar before it (the 2-D condition) and the real bar's chord.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainingTriple {
    pub prev: BarRoll,
    pub cur: BarRoll,
    pub chord: Option<ChordVec>,
}

/// One triple per bar; the first bar is conditioned on an empty bar.
pub fn make_training_triples(group: &BarGroup) -> Vec<TrainingTriple> {
    let mut prev = BarRoll::EMPTY;
    group
        .bars
        .iter()
        .enumerate()
        .map(|(k, &cur)| {
            let t = TrainingTriple {
                prev,
                cur,
                chord: group.chords.as_ref().map(|c| c[k]),
            };
            prev = cur;
            t
        })
        .collect()
}

/// Seeded per-epoch shuffling into full batches of indices.
#[derive(Debug, Clone)]
pub struct BatchIter {
    len: usize,
    batch_size: usize,
    seed: u64,
}

impl BatchIter {
    pub fn new(len: usize, batch_size: usize, seed: u64) -> Result<Self, DatasetError> {
        if len == 0 {
            return Err(DatasetError::Contract("cannot batch an empty dataset".into()));
        }
        if batch_size == 0 {
            return Err(DatasetError::Contract("batch size must be at least 1".into()));
        }
        Ok(BatchIter { len, batch_size, seed })
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.len / self.batch_size
    }

    /// Index batches for `epoch`; the trailing partial batch is dropped.
    pub fn epoch(&self, epoch: u64) -> Vec<Vec<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(epoch);
        let mut order: Vec<usize> = (0..self.len).collect();
        order.shuffle(&mut rng);
        order.chunks_exact(self.batch_size).map(<[usize]>::to_vec).collect()
    }
}
