use std::fmt;

use super::{chord_to_vec, BarRoll, Chord, ChordVec, REGISTER_HIGH, REGISTER_LOW, STEPS};
use crate::midi::{quantize, GridNote, MidiSong, STEPS_PER_BAR};

pub const BARS_PER_GROUP: usize = 8;

/// Shift by whole octaves into C4..B5, keeping the pitch class.
pub fn fold_to_register(pitch: u8) -> u8 {
    let mut p = pitch;
    while p < REGISTER_LOW {
        p += 12;
    }
    while p > REGISTER_HIGH {
        p -= 12;
    }
    p
}

/// Make a note list monophonic: where notes overlap, the later onset wins
/// and the earlier note is cut at that onset. Among notes sharing an onset
/// the longest (then highest) is kept.
pub fn resolve_overlaps(mut notes: Vec<GridNote>) -> Vec<GridNote> {
    notes.sort();
    let mut out: Vec<GridNote> = Vec::with_capacity(notes.len());
    for n in notes {
        while let Some(last) = out.last_mut() {
            if last.start == n.start {
                out.pop();
            } else {
                if last.end() > n.start {
                    last.len = n.start - last.start;
                }
                break;
            }
        }
        out.push(n);
    }
    out
}

/// Split notes at every barline into `n_bars` bar-relative lists. Notes past
/// the last bar are discarded.
pub fn split_at_barlines(notes: &[GridNote], n_bars: usize) -> Vec<Vec<GridNote>> {
    let bar = STEPS_PER_BAR;
    let mut bars = vec![Vec::new(); n_bars];
    for n in notes {
        let mut start = n.start;
        let end = n.end();
        while start < end {
            let index = (start / bar) as usize;
            if index >= n_bars {
                break;
            }
            let bar_end = (index as u32 + 1) * bar;
            let seg_end = end.min(bar_end);
            bars[index].push(GridNote {
                start: start - index as u32 * bar,
                len: seg_end - start,
                pitch: n.pitch,
            });
            start = seg_end;
        }
    }
    bars
}

/// Bar lists for every complete 8-bar group; the remainder is dropped.
pub fn segment_into_bars(notes: &[GridNote]) -> Vec<Vec<GridNote>> {
    let end = notes.iter().map(GridNote::end).max().unwrap_or(0);
    let n_bars = end.div_ceil(STEPS_PER_BAR) as usize;
    split_at_barlines(notes, n_bars / BARS_PER_GROUP * BARS_PER_GROUP)
}

/// Mark bar-relative notes on a roll without filling pauses.
pub fn raw_roll(notes: &[GridNote]) -> BarRoll {
    let mut cols = [None; STEPS];
    for n in resolve_overlaps(notes.to_vec()) {
        for step in n.start..n.end().min(STEPS as u32) {
            cols[step as usize] = Some(n.pitch);
        }
    }
    BarRoll::from_columns(cols).expect("MIDI pitches are below 128")
}

/// Roll with every pause filled: a note is held through the silence that
/// follows it, and a bar that opens silent starts with its first note.
/// `None` when the bar holds no notes.
pub fn bar_to_roll(notes: &[GridNote]) -> Option<BarRoll> {
    let raw = raw_roll(notes);
    let first = raw.columns().iter().flatten().next().copied()?;
    let mut cols = *raw.columns();
    let mut held = first;
    for c in cols.iter_mut() {
        match c {
            Some(p) => held = *p,
            None => *c = Some(held),
        }
    }
    BarRoll::from_columns(cols)
}

/// A chord held over a span of grid steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChordSpan {
    pub chord: Chord,
    pub start: u32,
    pub len: u32,
}

/// Group simultaneous chord-track notes into triads.
/// Fails with the offending step when a group is not a major or minor triad.
pub fn chord_spans(notes: &[GridNote]) -> Result<Vec<ChordSpan>, Rejection> {
    let mut sorted = notes.to_vec();
    sorted.sort();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let start = sorted[i].start;
        let group: Vec<&GridNote> = sorted[i..].iter().take_while(|n| n.start == start).collect();
        i += group.len();
        let classes: Vec<u8> = group.iter().map(|n| n.pitch % 12).collect();
        let chord = Chord::from_pitch_classes(&classes).ok_or(Rejection::NonTriadChord { step: start })?;
        let len = group.iter().map(|n| n.len).max().unwrap_or(1);
        spans.push(ChordSpan { chord, start, len });
    }
    Ok(spans)
}

/// The chord sounding longest within one bar, ties going to the earliest.
/// Spans are bar-relative.
pub fn prune_chords(spans: &[ChordSpan]) -> Option<Chord> {
    let mut totals: Vec<(Chord, u32, u32)> = Vec::new();
    for s in spans {
        match totals.iter_mut().find(|(c, _, _)| *c == s.chord) {
            Some(t) => {
                t.1 += s.len;
                t.2 = t.2.min(s.start);
            }
            None => totals.push((s.chord, s.len, s.start)),
        }
    }
    totals
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))
        .map(|t| t.0)
}

fn spans_in_bar(spans: &[ChordSpan], bar: usize) -> Vec<ChordSpan> {
    let lo = bar as u32 * STEPS_PER_BAR;
    let hi = lo + STEPS_PER_BAR;
    spans
        .iter()
        .filter_map(|s| {
            let a = s.start.max(lo);
            let b = (s.start + s.len).min(hi);
            (a < b).then(|| ChordSpan {
                chord: s.chord,
                start: a - lo,
                len: b - a,
            })
        })
        .collect()
}

/// Eight consecutive preprocessed bars and, when the song has a chord
/// track, one chord per bar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BarGroup {
    pub bars: Vec<BarRoll>,
    pub chords: Option<Vec<ChordVec>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rejection {
    NotFourFour,
    NoMelody,
    NonTriadChord { step: u32 },
    TooShort { bars: usize },
    NoUsableGroups,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::NotFourFour => write!(f, "time signature is not 4/4"),
            Rejection::NoMelody => write!(f, "no note track"),
            Rejection::NonTriadChord { step } => write!(f, "non-triad chord at step {step}"),
            Rejection::TooShort { bars } => write!(f, "only {bars} bars, need {BARS_PER_GROUP}"),
            Rejection::NoUsableGroups => write!(f, "every 8-bar group had an empty or chord-less bar"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessedSong {
    pub groups: Vec<BarGroup>,
    pub has_chords: bool,
    /// Why individual groups were skipped.
    pub skipped: Vec<String>,
}

/// Quantized, overlap-free, register-folded notes of the melody track.
pub fn melody_notes(song: &MidiSong) -> Result<Vec<GridNote>, Rejection> {
    if !song.is_four_four() {
        return Err(Rejection::NotFourFour);
    }
    let melody_track = song.tracks.first().ok_or(Rejection::NoMelody)?;
    let melody: Vec<GridNote> = resolve_overlaps(quantize(&melody_track.notes, song.ppq))
        .into_iter()
        .filter(|n| n.len > 0)
        .map(|n| GridNote {
            pitch: fold_to_register(n.pitch),
            ..n
        })
        .collect();
    if melody.is_empty() {
        return Err(Rejection::NoMelody);
    }
    Ok(melody)
}

/// First melody bar of `song`, preprocessed like training bars.
pub fn primer_bar(song: &MidiSong) -> Result<BarRoll, Rejection> {
    let melody = melody_notes(song)?;
    let first = split_at_barlines(&melody, 1).swap_remove(0);
    bar_to_roll(&first).ok_or(Rejection::NoMelody)
}

/// Melody is the first note track, chords (if any) the second.
pub fn preprocess_song(song: &MidiSong) -> Result<PreprocessedSong, Rejection> {
    let melody = melody_notes(song)?;
    let chord_notes = song.tracks.get(1).map(|t| quantize(&t.notes, song.ppq));
    let spans = chord_notes.as_deref().map(chord_spans).transpose()?;

    let end = melody
        .iter()
        .map(GridNote::end)
        .chain(spans.iter().flatten().map(|s| s.start + s.len))
        .max()
        .unwrap_or(0);
    let total_bars = end.div_ceil(STEPS_PER_BAR) as usize;
    let n_groups = total_bars / BARS_PER_GROUP;
    if n_groups == 0 {
        return Err(Rejection::TooShort { bars: total_bars });
    }
    let bars = split_at_barlines(&melody, n_groups * BARS_PER_GROUP);

    let mut groups = Vec::new();
    let mut skipped = Vec::new();
    'group: for g in 0..n_groups {
        let mut rolls = Vec::with_capacity(BARS_PER_GROUP);
        for k in 0..BARS_PER_GROUP {
            let index = g * BARS_PER_GROUP + k;
            match bar_to_roll(&bars[index]) {
                Some(r) => rolls.push(r),
                None => {
                    skipped.push(format!("group {g}: bar {index} has no notes"));
                    continue 'group;
                }
            }
        }
        let chords = match &spans {
            None => None,
            Some(spans) => {
                let mut out: Vec<ChordVec> = Vec::with_capacity(BARS_PER_GROUP);
                for k in 0..BARS_PER_GROUP {
                    let index = g * BARS_PER_GROUP + k;
                    match (prune_chords(&spans_in_bar(spans, index)), out.last()) {
                        (Some(c), _) => out.push(chord_to_vec(c)),
                        (None, Some(prev)) => out.push(*prev),
                        (None, None) => {
                            skipped.push(format!("group {g}: bar {index} opens without a chord"));
                            continue 'group;
                        }
                    }
                }
                Some(out)
            }
        };
        groups.push(BarGroup { bars: rolls, chords });
    }
    if groups.is_empty() {
        return Err(Rejection::NoUsableGroups);
    }
    Ok(PreprocessedSong {
        groups,
        has_chords: spans.is_some(),
        skipped,
    })
}
