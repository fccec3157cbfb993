//! Standard MIDI File input and output, and sixteenth-note quantization.

mod parse;
mod quantize;
mod write;

pub use parse::parse_midi;
pub use quantize::{quantize, GridNote, STEPS_PER_BAR, STEPS_PER_QUARTER};
pub use write::{write_midi, write_song, CHORD_BASE_PITCH, WRITE_PPQ};

/// Microseconds per quarter note at 120 BPM.
pub const DEFAULT_TEMPO: u32 = 500_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MidiError {
    #[error("byte {pos}: expected \"{expected}\" chunk")]
    BadMagic { pos: usize, expected: &'static str },
    #[error("byte {pos}: truncated {what}")]
    Truncated { pos: usize, what: &'static str },
    #[error("byte {pos}: unsupported SMF format {format}")]
    UnsupportedFormat { pos: usize, format: u16 },
    #[error("byte {pos}: SMPTE time division is not supported")]
    UnsupportedDivision { pos: usize },
    #[error("byte {pos}: {reason}")]
    Malformed { pos: usize, reason: String },
    #[error("{0}")]
    Contract(String),
}

/// A sounding note on one MIDI channel, in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoteEvent {
    pub pitch: u8,
    pub onset: u64,
    pub duration: u64,
    pub channel: u8,
    /// Kept for completeness; nothing downstream reads it.
    pub velocity: u8,
}

impl NoteEvent {
    pub fn end(&self) -> u64 {
        self.onset + self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeSignature {
    pub numerator: u8,
    pub denominator: u8,
}

impl TimeSignature {
    pub const FOUR_FOUR: TimeSignature = TimeSignature {
        numerator: 4,
        denominator: 4,
    };
}

/// Notes of one channel within one SMF track, sorted by onset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoteTrack {
    pub track: usize,
    pub channel: u8,
    pub notes: Vec<NoteEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MidiSong {
    pub ppq: u16,
    /// Microseconds per quarter note (first tempo event, else 120 BPM).
    pub tempo: u32,
    pub time_signatures: Vec<(u64, TimeSignature)>,
    /// Non-empty note tracks ordered by (SMF track, channel).
    pub tracks: Vec<NoteTrack>,
    /// Tick of the last end-of-track event.
    pub length_ticks: u64,
}

impl MidiSong {
    /// True when every time signature is 4/4; a file without one counts as 4/4.
    pub fn is_four_four(&self) -> bool {
        self.time_signatures
            .iter()
            .all(|(_, ts)| *ts == TimeSignature::FOUR_FOUR)
    }

    pub fn ticks_per_bar(&self) -> u64 {
        self.ppq as u64 * 4
    }
}
