mod common;

use common::{melody_rolls, random_roll};
use midinet::dataset::{chord_spans, chord_to_vec, vec_to_chord};
use midinet::dataset::{BarRoll, Chord, STEPS};
use midinet::midi::{parse_midi, quantize, write_midi, MidiError, NoteEvent};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Hand-assembled SMF format 0 file with one track body.
fn smf(ppq: u16, track: &[u8]) -> Vec<u8> {
    let mut v = b"MThd".to_vec();
    v.extend_from_slice(&6u32.to_be_bytes());
    v.extend_from_slice(&0u16.to_be_bytes());
    v.extend_from_slice(&1u16.to_be_bytes());
    v.extend_from_slice(&ppq.to_be_bytes());
    v.extend_from_slice(b"MTrk");
    v.extend_from_slice(&(track.len() as u32).to_be_bytes());
    v.extend_from_slice(track);
    v
}

#[test]
fn single_note_file() {
    // delta 0 note-on C4, delta 480 (0x83 0x60) note-off, end of track
    let song = parse_midi(&smf(
        480,
        &[0x00, 0x90, 60, 100, 0x83, 0x60, 0x80, 60, 0, 0x00, 0xff, 0x2f, 0x00],
    ))
    .unwrap();
    assert_eq!(song.ppq, 480);
    assert_eq!(song.tracks.len(), 1);
    let n = song.tracks[0].notes[0];
    assert_eq!((n.pitch, n.onset, n.duration), (60, 0, 480));
}

#[test]
fn velocity_zero_closes_note_with_running_status() {
    let song = parse_midi(&smf(96, &[0x00, 0x90, 64, 90, 0x60, 64, 0, 0x00, 0xff, 0x2f, 0x00])).unwrap();
    let notes = &song.tracks[0].notes;
    assert_eq!(notes.len(), 1);
    assert_eq!((notes[0].onset, notes[0].duration), (0, 96));
}

#[test]
fn dangling_note_closes_at_track_end() {
    let song = parse_midi(&smf(96, &[0x00, 0x90, 64, 90, 0x30, 0xff, 0x2f, 0x00])).unwrap();
    assert_eq!(song.tracks[0].notes[0].duration, 48);
}

#[test]
fn overlapping_same_pitch_notes_merge() {
    // on@0, on@10, off@20, off@30 → one note 0..30
    let track = [
        0x00, 0x90, 60, 90, 10, 0x90, 60, 90, 10, 0x80, 60, 0, 10, 0x80, 60, 0, 0, 0xff, 0x2f, 0,
    ];
    let song = parse_midi(&smf(96, &track)).unwrap();
    assert_eq!(song.tracks[0].notes.len(), 1);
    assert_eq!(song.tracks[0].notes[0].duration, 30);
}

#[test]
fn malformed_inputs() {
    assert!(matches!(
        parse_midi(b"RIFF0000"),
        Err(MidiError::BadMagic { pos: 0, .. })
    ));
    assert!(matches!(parse_midi(b""), Err(MidiError::BadMagic { .. })));
    let mut fmt2 = smf(96, &[0, 0xff, 0x2f, 0]);
    fmt2[9] = 2;
    assert!(matches!(
        parse_midi(&fmt2),
        Err(MidiError::UnsupportedFormat { format: 2, .. })
    ));
    let full = smf(96, &[0x00, 0x90, 60, 100, 0x60, 0x80, 60, 0, 0, 0xff, 0x2f, 0]);
    assert!(matches!(
        parse_midi(&full[..full.len() - 4]),
        Err(MidiError::Truncated { .. })
    ));
    let mut smpte = full.clone();
    smpte[12] = 0xe7;
    assert!(matches!(parse_midi(&smpte), Err(MidiError::UnsupportedDivision { .. })));
}

#[test]
fn time_signature_and_tempo_are_read() {
    let track = [
        0x00, 0xff, 0x51, 0x03, 0x07, 0xa1, 0x20, // 500000 µs
        0x00, 0xff, 0x58, 0x04, 3, 2, 24, 8, // 3/4
        0x00, 0x90, 60, 100, 0x60, 0x80, 60, 0, 0, 0xff, 0x2f, 0,
    ];
    let song = parse_midi(&smf(96, &track)).unwrap();
    assert_eq!(song.tempo, 500_000);
    assert!(!song.is_four_four());
}

#[test]
fn full_bar_note() {
    let bytes = write_midi(&[BarRoll::constant(60)], None, 120.0).unwrap();
    let song = parse_midi(&bytes).unwrap();
    let notes = &song.tracks[0].notes;
    assert_eq!(notes.len(), 1);
    let g = quantize(notes, song.ppq);
    assert_eq!((g[0].pitch, g[0].start, g[0].len), (60, 0, 16));
}

#[test]
fn two_bars_span_thirty_two_steps() {
    let mut cols = [Some(62); STEPS];
    cols[15] = Some(64);
    let bars = [BarRoll::constant(60), BarRoll::from_columns(cols).unwrap()];
    let bytes = write_midi(&bars, None, 100.0).unwrap();
    let song = parse_midi(&bytes).unwrap();
    let grid = quantize(&song.tracks[0].notes, song.ppq);
    assert_eq!(grid.iter().map(|g| g.end()).max(), Some(32));
    assert_eq!(song.length_ticks / song.ticks_per_bar(), 2);
    assert_eq!(melody_rolls(&bytes), bars);
}

#[test]
fn chords_written_as_whole_bar_triads() {
    let chords: Vec<_> = ["C", "Am", "F#", "Bbm"]
        .iter()
        .map(|c| chord_to_vec(Chord::parse(c).unwrap()))
        .collect();
    let bars = vec![BarRoll::constant(67); 4];
    let song = parse_midi(&write_midi(&bars, Some(&chords), 120.0).unwrap()).unwrap();
    assert_eq!(song.tracks.len(), 2);
    let spans = chord_spans(&quantize(&song.tracks[1].notes, song.ppq)).unwrap();
    assert_eq!(spans.len(), 4);
    for (k, s) in spans.iter().enumerate() {
        assert_eq!((s.start, s.len), (16 * k as u32, 16));
        assert_eq!(s.chord, vec_to_chord(&chords[k]).unwrap());
    }
}

#[test]
fn empty_bar_sequence_rejected() {
    assert!(matches!(write_midi(&[], None, 120.0), Err(MidiError::Contract(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn write_parse_round_trip(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bars: Vec<BarRoll> = (0..n).map(|_| random_roll(&mut rng)).collect();
        let bytes = write_midi(&bars, None, 120.0).unwrap();
        prop_assert_eq!(melody_rolls(&bytes), bars);
    }

    #[test]
    fn parser_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let _ = parse_midi(&bytes);
    }

    #[test]
    fn mutated_files_parse_or_fail_cleanly(seed in any::<u64>(), flips in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bars: Vec<BarRoll> = (0..2).map(|_| random_roll(&mut rng)).collect();
        let mut bytes = write_midi(&bars, None, 120.0).unwrap();
        for _ in 0..flips {
            let i = rng.random_range(0..bytes.len());
            bytes[i] = rng.random();
        }
        if rng.random_bool(0.3) {
            let cut = rng.random_range(0..bytes.len());
            bytes.truncate(cut);
        }
        let _ = parse_midi(&bytes);
    }
}

#[test]
fn note_event_end() {
    let e = NoteEvent {
        pitch: 1,
        onset: 5,
        duration: 7,
        channel: 0,
        velocity: 0,
    };
    assert_eq!(e.end(), 12);
}
