use crate::tensor::Tensor;

/// Pitch rows in a bar (all MIDI notes).
pub const PITCHES: usize = 128;
/// Sixteenth-note columns in a 4/4 bar.
pub const STEPS: usize = 16;
/// Lowest pitch of the two-octave training register (C4).
pub const REGISTER_LOW: u8 = 60;
/// Highest pitch of the training register (B5).
pub const REGISTER_HIGH: u8 = 83;

/// One bar of monophonic melody as a 128×16 binary matrix.
///
/// Stored column-wise as the single active pitch (if any) per step, which
/// makes polyphony unrepresentable.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BarRoll {
    columns: [Option<u8>; STEPS],
}

impl BarRoll {
    /// The all-zero bar.
    pub const EMPTY: BarRoll = BarRoll { columns: [None; STEPS] };

    pub fn from_columns(columns: [Option<u8>; STEPS]) -> Option<Self> {
        columns
            .iter()
            .all(|c| c.is_none_or(|p| (p as usize) < PITCHES))
            .then_some(BarRoll { columns })
    }

    /// A bar holding `pitch` on every step.
    pub fn constant(pitch: u8) -> Self {
        assert!((pitch as usize) < PITCHES);
        BarRoll {
            columns: [Some(pitch); STEPS],
        }
    }

    pub fn columns(&self) -> &[Option<u8>; STEPS] {
        &self.columns
    }

    pub fn pitch_at(&self, step: usize) -> Option<u8> {
        self.columns[step]
    }

    pub fn is_empty(&self) -> bool {
        self.columns.iter().all(Option::is_none)
    }

    /// Every step has exactly one active pitch.
    pub fn is_gapless(&self) -> bool {
        self.columns.iter().all(Option::is_some)
    }

    pub fn active_cells(&self) -> usize {
        self.columns.iter().flatten().count()
    }

    pub fn in_register(&self) -> bool {
        self.columns
            .iter()
            .flatten()
            .all(|p| (REGISTER_LOW..=REGISTER_HIGH).contains(p))
    }

    /// Row-major `[pitch][step]` matrix of 0/1 values.
    pub fn to_matrix(&self) -> Vec<f32> {
        let mut m = vec![0.0; PITCHES * STEPS];
        for (step, p) in self.columns.iter().enumerate() {
            if let Some(p) = p {
                m[*p as usize * STEPS + step] = 1.0;
            }
        }
        m
    }

    /// Inverse of [`BarRoll::to_matrix`]; `None` for non-binary or polyphonic input.
    pub fn from_matrix(m: &[f32]) -> Option<Self> {
        if m.len() != PITCHES * STEPS {
            return None;
        }
        let mut columns = [None; STEPS];
        for (step, col) in columns.iter_mut().enumerate() {
            for pitch in 0..PITCHES {
                match m[pitch * STEPS + step] {
                    0.0 => {}
                    1.0 if col.is_none() => *col = Some(pitch as u8),
                    _ => return None,
                }
            }
        }
        Some(BarRoll { columns })
    }

    /// `1×1×128×16` tensor.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new([1, 1, PITCHES, STEPS], self.to_matrix()).expect("roll shape")
    }

    /// Stack bars into a `B×1×128×16` tensor.
    pub fn batch_tensor(bars: &[BarRoll]) -> Tensor {
        let mut data = Vec::with_capacity(bars.len() * PITCHES * STEPS);
        for b in bars {
            data.extend(b.to_matrix());
        }
        Tensor::new([bars.len(), 1, PITCHES, STEPS], data).expect("roll batch shape")
    }

    /// Keep only the most active pitch per step (ties to the lowest pitch).
    pub fn monophonize(activations: &[f32]) -> Self {
        assert_eq!(activations.len(), PITCHES * STEPS, "activation grid must be 128x16");
        let mut columns = [None; STEPS];
        for (step, col) in columns.iter_mut().enumerate() {
            let mut best = 0;
            let mut best_val = f32::NEG_INFINITY;
            for pitch in 0..PITCHES {
                let v = activations[pitch * STEPS + step];
                if v > best_val {
                    best_val = v;
                    best = pitch;
                }
            }
            *col = Some(best as u8);
        }
        BarRoll { columns }
    }

    pub fn map_pitches(&self, f: impl Fn(u8) -> u8) -> Self {
        let mut columns = self.columns;
        for c in columns.iter_mut().flatten() {
            *c = f(*c);
        }
        BarRoll { columns }
    }

    /// Column encoding used by the dataset file: pitch, or 255 for silence.
    pub fn to_bytes(&self) -> [u8; STEPS] {
        self.columns.map(|c| c.unwrap_or(u8::MAX))
    }

    pub fn from_bytes(bytes: &[u8; STEPS]) -> Option<Self> {
        let mut columns = [None; STEPS];
        for (col, &b) in columns.iter_mut().zip(bytes) {
            *col = match b {
                u8::MAX => None,
                p if (p as usize) < PITCHES => Some(p),
                _ => return None,
            };
        }
        Some(BarRoll { columns })
    }
}

impl std::fmt::Debug for BarRoll {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let cols: Vec<String> = self
            .columns
            .iter()
            .map(|c| c.map_or("-".to_string(), |p| p.to_string()))
            .collect();
        write!(f, "BarRoll[{}]", cols.join(" "))
    }
}
