use std::fmt;
use std::str::FromStr;

use super::DatasetError;

pub const CHORD_DIMS: usize = 13;

const NOTE_NAMES: [&str; 12] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quality {
    Major,
    Minor,
}

impl FromStr for Quality {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "major" | "maj" => Ok(Quality::Major),
            "minor" | "min" => Ok(Quality::Minor),
            other => Err(DatasetError::UnsupportedChord(format!("chord quality {other:?}"))),
        }
    }
}

/// A major or minor triad.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Chord {
    /// Pitch class of the root, C = 0.
    pub root: u8,
    pub quality: Quality,
}

impl Chord {
    pub fn new(root: u8, quality: Quality) -> Result<Self, DatasetError> {
        if root >= 12 {
            return Err(DatasetError::UnsupportedChord(format!("root pitch class {root}")));
        }
        Ok(Chord { root, quality })
    }

    /// Root, third and fifth as semitones above C (not wrapped).
    pub fn triad(&self) -> [u8; 3] {
        let third = match self.quality {
            Quality::Major => 4,
            Quality::Minor => 3,
        };
        [self.root, self.root + third, self.root + 7]
    }

    /// Recognize a triad from the pitch classes sounding together.
    pub fn from_pitch_classes(classes: &[u8]) -> Option<Chord> {
        let mut set = [false; 12];
        for &pc in classes {
            set[(pc % 12) as usize] = true;
        }
        if set.iter().filter(|&&b| b).count() != 3 {
            return None;
        }
        (0..12u8).find_map(|root| {
            [Quality::Major, Quality::Minor].into_iter().find_map(|quality| {
                let c = Chord { root, quality };
                c.triad().iter().all(|p| set[(p % 12) as usize]).then_some(c)
            })
        })
    }

    pub fn transpose(&self, semitones: u8) -> Chord {
        Chord {
            root: (self.root + semitones % 12) % 12,
            quality: self.quality,
        }
    }

    /// Parse a symbol such as `C`, `F#`, `Bb`, `Am` or `Ebm`.
    pub fn parse(token: &str) -> Result<Chord, DatasetError> {
        let bad = || DatasetError::UnsupportedChord(format!("chord symbol {token:?}"));
        let t = token.trim();
        let mut chars = t.chars();
        let letter = chars.next().ok_or_else(bad)?;
        let mut root: i32 = match letter {
            'C' => 0,
            'D' => 2,
            'E' => 4,
            'F' => 5,
            'G' => 7,
            'A' => 9,
            'B' => 11,
            _ => return Err(bad()),
        };
        let rest = chars.as_str();
        let rest = if let Some(r) = rest.strip_prefix('#') {
            root += 1;
            r
        } else if let Some(r) = rest.strip_prefix('b') {
            root -= 1;
            r
        } else {
            rest
        };
        let quality = match rest {
            "" => Quality::Major,
            "m" => Quality::Minor,
            _ => return Err(bad()),
        };
        Chord::new(root.rem_euclid(12) as u8, quality)
    }
}

impl fmt::Display for Chord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let suffix = if self.quality == Quality::Minor { "m" } else { "" };
        write!(f, "{}{}", NOTE_NAMES[self.root as usize], suffix)
    }
}

/// 13-dimensional chord condition: a one-hot key slot plus a minor flag.
///
/// Major chords occupy the slot of their root counted from C; minor chords
/// the slot of their root counted from A, i.e. the slot of the relative
/// major.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChordVec([u8; CHORD_DIMS]);

impl ChordVec {
    pub fn as_bytes(&self) -> &[u8; CHORD_DIMS] {
        &self.0
    }

    pub fn from_bytes(bytes: [u8; CHORD_DIMS]) -> Result<Self, DatasetError> {
        let v = ChordVec(bytes);
        vec_to_chord(&v)?;
        Ok(v)
    }

    pub fn to_f32(&self) -> [f32; CHORD_DIMS] {
        self.0.map(f32::from)
    }

    /// Zero-based index of the active key slot.
    pub fn key_slot(&self) -> usize {
        self.0[..12].iter().position(|&b| b == 1).expect("valid chord vector")
    }
}

impl fmt::Debug for ChordVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ChordVec(slot {}, minor {})", self.key_slot() + 1, self.0[12])
    }
}

pub fn chord_to_vec(chord: Chord) -> ChordVec {
    let mut v = [0u8; CHORD_DIMS];
    let slot = match chord.quality {
        Quality::Major => chord.root,
        // A (9) takes slot 0, A# slot 1, ..., G# slot 11.
        Quality::Minor => (chord.root + 3) % 12,
    };
    v[slot as usize] = 1;
    v[12] = u8::from(chord.quality == Quality::Minor);
    ChordVec(v)
}

pub fn vec_to_chord(v: &ChordVec) -> Result<Chord, DatasetError> {
    let b = &v.0;
    let ones: Vec<usize> = (0..12).filter(|&i| b[i] == 1).collect();
    if ones.len() != 1 || b.iter().any(|&x| x > 1) {
        return Err(DatasetError::UnsupportedChord(format!("chord vector {b:?}")));
    }
    let slot = ones[0] as u8;
    Ok(match b[12] {
        0 => Chord {
            root: slot,
            quality: Quality::Major,
        },
        _ => Chord {
            root: (slot + 9) % 12,
            quality: Quality::Minor,
        },
    })
}
