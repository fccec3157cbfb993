use super::{MidiError, MidiSong, NoteTrack, TimeSignature, STEPS_PER_BAR};
use crate::dataset::{vec_to_chord, BarRoll, ChordVec};
use crate::midi::{GridNote, NoteEvent};

pub const WRITE_PPQ: u16 = 480;

/// Chord triads are voiced upward from this octave (C3).
pub const CHORD_BASE_PITCH: u8 = 48;

fn vlq(mut v: u32, out: &mut Vec<u8>) {
    let mut buf = [0u8; 4];
    let mut n = 0;
    loop {
        buf[n] = (v & 0x7f) as u8;
        n += 1;
        v >>= 7;
        if v == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(if i > 0 { buf[i] | 0x80 } else { buf[i] });
    }
}

/// Serialize a song as SMF format 1, one MTrk per note track. Tempo and
/// time signature go at the head of the first track.
pub fn write_song(song: &MidiSong) -> Result<Vec<u8>, MidiError> {
    if song.tracks.is_empty() {
        return Err(MidiError::Contract("song has no note tracks".into()));
    }
    let mut out = Vec::new();
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&(song.tracks.len() as u16).to_be_bytes());
    out.extend_from_slice(&song.ppq.to_be_bytes());

    for (k, track) in song.tracks.iter().enumerate() {
        // (tick, order, bytes): note-offs sort before note-ons at equal ticks.
        let mut events: Vec<(u64, u8, Vec<u8>)> = Vec::new();
        if k == 0 {
            let t = song.tempo.to_be_bytes();
            events.push((0, 0, vec![0xff, 0x51, 0x03, t[1], t[2], t[3]]));
            for &(tick, ts) in &song.time_signatures {
                let log2 = ts.denominator.max(1).trailing_zeros() as u8;
                events.push((tick, 0, vec![0xff, 0x58, 0x04, ts.numerator, log2, 24, 8]));
            }
        }
        let ch = track.channel & 0x0f;
        for n in &track.notes {
            if n.pitch > 127 || n.duration == 0 {
                return Err(MidiError::Contract(format!("unwritable note {n:?}")));
            }
            events.push((n.onset, 2, vec![0x90 | ch, n.pitch, n.velocity.clamp(1, 127)]));
            events.push((n.end(), 1, vec![0x80 | ch, n.pitch, 64]));
        }
        events.sort_by_key(|(t, order, bytes)| (*t, *order, bytes.get(1).copied()));
        let last = events.last().map_or(0, |e| e.0);
        let end = song.length_ticks.max(last);

        let mut body = Vec::new();
        let mut now = 0u64;
        for (tick, _, bytes) in &events {
            let delta = u32::try_from(tick - now).map_err(|_| MidiError::Contract("delta time overflow".into()))?;
            vlq(delta, &mut body);
            body.extend_from_slice(bytes);
            now = *tick;
        }
        vlq((end - now) as u32, &mut body);
        body.extend_from_slice(&[0xff, 0x2f, 0x00]);

        out.extend_from_slice(b"MTrk");
        out.extend_from_slice(&(body.len() as u32).to_be_bytes());
        out.extend_from_slice(&body);
    }
    Ok(out)
}

/// Merge each run of one pitch over consecutive steps into a single note.
pub(crate) fn rolls_to_grid_notes(bars: &[BarRoll]) -> Vec<GridNote> {
    let mut notes: Vec<GridNote> = Vec::new();
    let mut step = 0u32;
    for bar in bars {
        for col in bar.columns() {
            match (col, notes.last_mut()) {
                (Some(p), Some(last)) if last.pitch == *p && last.end() == step => last.len += 1,
                (Some(p), _) => notes.push(GridNote {
                    start: step,
                    len: 1,
                    pitch: *p,
                }),
                (None, _) => {}
            }
            step += 1;
        }
    }
    notes
}

/// Render bars (and optionally one triad per bar) as a playable SMF.
///
/// Track 1 holds the melody on channel 0; track 2, when chords are given,
/// holds each bar's triad as a whole-bar block on channel 1.
pub fn write_midi(bars: &[BarRoll], chords: Option<&[ChordVec]>, tempo_bpm: f32) -> Result<Vec<u8>, MidiError> {
    if bars.is_empty() {
        return Err(MidiError::Contract("cannot write an empty bar sequence".into()));
    }
    if !(tempo_bpm > 0.0 && tempo_bpm.is_finite()) {
        return Err(MidiError::Contract(format!("tempo {tempo_bpm} BPM")));
    }
    let ppq = WRITE_PPQ;
    let bar_ticks = ppq as u64 * 4;
    let melody: Vec<NoteEvent> = rolls_to_grid_notes(bars).iter().map(|g| g.to_event(ppq, 0)).collect();
    let mut tracks = vec![NoteTrack {
        track: 0,
        channel: 0,
        notes: melody,
    }];
    if let Some(chords) = chords {
        if chords.len() != bars.len() {
            return Err(MidiError::Contract(format!(
                "{} chords for {} bars",
                chords.len(),
                bars.len()
            )));
        }
        let mut notes = Vec::new();
        for (k, cv) in chords.iter().enumerate() {
            let chord = vec_to_chord(cv).map_err(|e| MidiError::Contract(e.to_string()))?;
            for pc in chord.triad() {
                notes.push(NoteEvent {
                    pitch: CHORD_BASE_PITCH + pc,
                    onset: k as u64 * bar_ticks,
                    duration: bar_ticks,
                    channel: 1,
                    velocity: 80,
                });
            }
        }
        tracks.push(NoteTrack {
            track: 1,
            channel: 1,
            notes,
        });
    }
    let song = MidiSong {
        ppq,
        tempo: ((60_000_000.0 / tempo_bpm as f64).round() as u32).clamp(1, 0x00ff_ffff),
        time_signatures: vec![(0, TimeSignature::FOUR_FOUR)],
        tracks,
        length_ticks: bars.len() as u64 * STEPS_PER_BAR as u64 * ppq as u64 / 4,
    };
    write_song(&song)
}
