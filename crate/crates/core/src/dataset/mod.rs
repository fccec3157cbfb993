//! From parsed MIDI songs to (previous bar, current bar, chord) training
//! triples: grid segmentation, pause filling, register folding, one chord
//! per bar, twelve-key augmentation, batching and the dataset file format.

mod augment;
mod chord;
mod io;
mod preprocess;
mod roll;
pub mod synth;
mod triples;

pub use augment::{transpose_augment, transpose_group};
pub use chord::{chord_to_vec, vec_to_chord, Chord, ChordVec, Quality, CHORD_DIMS};
pub use io::{Dataset, DATASET_MAGIC, DATASET_VERSION};
pub use preprocess::{
    bar_to_roll, chord_spans, fold_to_register, melody_notes, preprocess_song, primer_bar, prune_chords, raw_roll,
    resolve_overlaps, segment_into_bars, split_at_barlines, BarGroup, ChordSpan, PreprocessedSong, Rejection,
    BARS_PER_GROUP,
};
pub use roll::{BarRoll, PITCHES, REGISTER_HIGH, REGISTER_LOW, STEPS};
pub use triples::{make_training_triples, BatchIter, TrainingTriple};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DatasetError {
    #[error("unsupported chord: {0}")]
    UnsupportedChord(String),
    #[error("dataset byte {pos}: {reason}")]
    Format { pos: usize, reason: String },
    #[error("{0}")]
    Contract(String),
}
