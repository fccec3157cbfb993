use super::NoteEvent;

pub const STEPS_PER_QUARTER: u64 = 4;
pub const STEPS_PER_BAR: u32 = 16;

/// A note on the sixteenth-note grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridNote {
    pub start: u32,
    pub len: u32,
    pub pitch: u8,
}

impl GridNote {
    pub fn end(&self) -> u32 {
        self.start + self.len
    }

    /// Back to ticks at the given resolution.
    pub fn to_event(&self, ppq: u16, channel: u8) -> NoteEvent {
        let to_ticks = |steps: u32| (steps as u64 * ppq as u64 * 2 + STEPS_PER_QUARTER) / (2 * STEPS_PER_QUARTER);
        let onset = to_ticks(self.start);
        NoteEvent {
            pitch: self.pitch,
            onset,
            duration: to_ticks(self.end()) - onset,
            channel,
            velocity: 100,
        }
    }
}

/// `round(ticks · 4 / ppq)` with halves rounded up, in exact integers.
fn ticks_to_steps(ticks: u64, ppq: u16) -> u64 {
    let ppq = ppq as u64;
    (2 * STEPS_PER_QUARTER * ticks + ppq) / (2 * ppq)
}

/// Snap events to sixteenth notes.
///
/// Onsets round to the nearest step (halves up) and durations to at least one
/// step. Events shorter than half a step are dropped.
pub fn quantize(events: &[NoteEvent], ppq: u16) -> Vec<GridNote> {
    let mut out = Vec::with_capacity(events.len());
    for e in events {
        if 2 * STEPS_PER_QUARTER * e.duration < ppq as u64 {
            log::warn!(
                "dropping note {} at tick {}: {} ticks is shorter than half a sixteenth",
                e.pitch,
                e.onset,
                e.duration
            );
            continue;
        }
        let start = ticks_to_steps(e.onset, ppq);
        let len = ticks_to_steps(e.duration, ppq).max(1);
        out.push(GridNote {
            start: start as u32,
            len: len as u32,
            pitch: e.pitch,
        });
    }
    out.sort();
    out
}
