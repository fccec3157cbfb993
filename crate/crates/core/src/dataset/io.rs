use super::{BarRoll, ChordVec, DatasetError, TrainingTriple, CHORD_DIMS, STEPS};

pub const DATASET_MAGIC: &[u8; 4] = b"MNDS";
pub const DATASET_VERSION: u8 = 1;

const FLAG_CHORDS: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 1 + 4;
const RECORD_LEN: usize = STEPS + STEPS + CHORD_DIMS;

/// Training triples plus whether they carry chords.
///
/// File layout (little-endian): `"MNDS"`, version byte, flags byte (bit 0 =
/// chords present), u32 record count, then per record 16 bytes of previous
/// bar, 16 bytes of current bar (active pitch per column, 255 = silent) and
/// 13 chord bytes (all zero when the dataset has no chords).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub has_chords: bool,
    pub triples: Vec<TrainingTriple>,
}

impl Dataset {
    pub fn new(triples: Vec<TrainingTriple>) -> Result<Self, DatasetError> {
        let with = triples.iter().filter(|t| t.chord.is_some()).count();
        if with != 0 && with != triples.len() {
            return Err(DatasetError::Contract(
                "dataset mixes triples with and without chords".into(),
            ));
        }
        Ok(Dataset {
            has_chords: with > 0,
            triples,
        })
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * self.triples.len());
        out.extend_from_slice(DATASET_MAGIC);
        out.push(DATASET_VERSION);
        out.push(if self.has_chords { FLAG_CHORDS } else { 0 });
        out.extend_from_slice(&(self.triples.len() as u32).to_le_bytes());
        for t in &self.triples {
            out.extend_from_slice(&t.prev.to_bytes());
            out.extend_from_slice(&t.cur.to_bytes());
            match &t.chord {
                Some(c) => out.extend_from_slice(c.as_bytes()),
                None => out.extend_from_slice(&[0; CHORD_DIMS]),
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DatasetError> {
        let err = |pos, reason: &str| DatasetError::Format {
            pos,
            reason: reason.to_string(),
        };
        if bytes.len() < 4 || &bytes[..4] != DATASET_MAGIC {
            return Err(err(0, "missing MNDS magic"));
        }
        if bytes.len() < HEADER_LEN {
            return Err(err(bytes.len(), "truncated header"));
        }
        if bytes[4] != DATASET_VERSION {
            return Err(err(4, &format!("unsupported version {}", bytes[4])));
        }
        let flags = bytes[5];
        if flags & !FLAG_CHORDS != 0 {
            return Err(err(5, &format!("unknown flags {flags:#04x}")));
        }
        let has_chords = flags & FLAG_CHORDS != 0;
        let count = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
        let expected = HEADER_LEN + count * RECORD_LEN;
        if bytes.len() != expected {
            return Err(err(
                bytes.len().min(expected),
                &format!("{count} records need {expected} bytes, file has {}", bytes.len()),
            ));
        }
        let mut triples = Vec::with_capacity(count);
        for (k, rec) in bytes[HEADER_LEN..].chunks_exact(RECORD_LEN).enumerate() {
            let pos = HEADER_LEN + k * RECORD_LEN;
            let bar = |off: usize| {
                let b: &[u8; STEPS] = rec[off..off + STEPS].try_into().expect("16 bytes");
                BarRoll::from_bytes(b).ok_or_else(|| err(pos + off, "pitch byte out of range"))
            };
            let prev = bar(0)?;
            let cur = bar(STEPS)?;
            let chord_bytes: [u8; CHORD_DIMS] = rec[2 * STEPS..].try_into().expect("13 bytes");
            let chord = if has_chords {
                Some(ChordVec::from_bytes(chord_bytes).map_err(|e| err(pos + 2 * STEPS, &e.to_string()))?)
            } else {
                None
            };
            triples.push(TrainingTriple { prev, cur, chord });
        }
        Ok(Dataset { has_chords, triples })
    }
}
