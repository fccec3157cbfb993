use std::collections::HashMap;

use super::{MidiError, MidiSong, NoteEvent, NoteTrack, TimeSignature, DEFAULT_TEMPO};

/// Cursor over a byte slice that reports absolute file offsets.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], base: usize) -> Self {
        Reader { bytes, pos: 0, base }
    }

    fn offset(&self) -> usize {
        self.base + self.pos
    }

    fn at_end(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], MidiError> {
        if self.bytes.len() - self.pos < n {
            return Err(MidiError::Truncated {
                pos: self.offset(),
                what,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, MidiError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, MidiError> {
        let b = self.take(2, what)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, MidiError> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Variable-length quantity of at most four bytes.
    fn vlq(&mut self, what: &'static str) -> Result<u32, MidiError> {
        let start = self.offset();
        let mut value = 0u32;
        for _ in 0..4 {
            let b = self.u8(what)?;
            value = (value << 7) | (b & 0x7f) as u32;
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(MidiError::Malformed {
            pos: start,
            reason: format!("{what} longer than four bytes"),
        })
    }

    fn data_byte(&mut self) -> Result<u8, MidiError> {
        let pos = self.offset();
        let b = self.u8("channel message")?;
        if b & 0x80 != 0 {
            return Err(MidiError::Malformed {
                pos,
                reason: format!("status byte {b:#04x} where a data byte was expected"),
            });
        }
        Ok(b)
    }
}

struct TrackData {
    notes: Vec<NoteEvent>,
    tempo: Option<u32>,
    time_signatures: Vec<(u64, TimeSignature)>,
    end_tick: u64,
}

/// Parse an SMF format 0 or 1 file into per-channel note lists.
pub fn parse_midi(bytes: &[u8]) -> Result<MidiSong, MidiError> {
    let mut r = Reader::new(bytes, 0);
    if bytes.len() < 4 || &bytes[..4] != b"MThd" {
        return Err(MidiError::BadMagic {
            pos: 0,
            expected: "MThd",
        });
    }
    r.take(4, "header magic")?;
    let header_len = r.u32("header length")? as usize;
    let header_pos = r.offset();
    let header = r.take(header_len, "header chunk")?;
    if header_len < 6 {
        return Err(MidiError::Truncated {
            pos: header_pos,
            what: "header chunk",
        });
    }
    let mut h = Reader::new(header, header_pos);
    let format = h.u16("format")?;
    let ntrks = h.u16("track count")?;
    let division = h.u16("division")?;
    if format > 1 {
        return Err(MidiError::UnsupportedFormat {
            pos: header_pos,
            format,
        });
    }
    if division & 0x8000 != 0 {
        return Err(MidiError::UnsupportedDivision { pos: header_pos + 4 });
    }
    if division == 0 {
        return Err(MidiError::Malformed {
            pos: header_pos + 4,
            reason: "zero ticks per quarter note".into(),
        });
    }

    let mut tracks = Vec::new();
    while tracks.len() < ntrks as usize {
        if r.at_end() {
            return Err(MidiError::Truncated {
                pos: r.offset(),
                what: "track list",
            });
        }
        let chunk_pos = r.offset();
        let kind = r.take(4, "chunk type")?;
        let len = r.u32("chunk length")? as usize;
        let body_pos = r.offset();
        let body = r.take(len, "track chunk")?;
        if kind != b"MTrk" {
            // Unknown chunk types are skipped.
            log::debug!("skipping chunk {:?} at byte {chunk_pos}", String::from_utf8_lossy(kind));
            continue;
        }
        tracks.push(parse_track(body, body_pos, tracks.len())?);
    }

    let mut song = MidiSong {
        ppq: division,
        tempo: DEFAULT_TEMPO,
        time_signatures: Vec::new(),
        tracks: Vec::new(),
        length_ticks: 0,
    };
    let mut tempo_set = false;
    for (index, data) in tracks.into_iter().enumerate() {
        if let (Some(t), false) = (data.tempo, tempo_set) {
            song.tempo = t;
            tempo_set = true;
        }
        song.time_signatures.extend(data.time_signatures);
        song.length_ticks = song.length_ticks.max(data.end_tick);
        let mut channels: Vec<u8> = data.notes.iter().map(|n| n.channel).collect();
        channels.sort_unstable();
        channels.dedup();
        for ch in channels {
            let mut notes: Vec<NoteEvent> = data.notes.iter().filter(|n| n.channel == ch).copied().collect();
            notes.sort_by_key(|n| (n.onset, n.pitch));
            song.tracks.push(NoteTrack {
                track: index,
                channel: ch,
                notes,
            });
        }
    }
    song.time_signatures.sort_by_key(|(t, _)| *t);
    Ok(song)
}

struct Open {
    onset: u64,
    velocity: u8,
    depth: u32,
}

fn parse_track(body: &[u8], base: usize, index: usize) -> Result<TrackData, MidiError> {
    let mut r = Reader::new(body, base);
    let mut tick = 0u64;
    let mut running: Option<u8> = None;
    let mut open: HashMap<(u8, u8), Open> = HashMap::new();
    let mut out = TrackData {
        notes: Vec::new(),
        tempo: None,
        time_signatures: Vec::new(),
        end_tick: 0,
    };

    let close = |out: &mut TrackData, ch: u8, pitch: u8, o: Open, at: u64| {
        if at > o.onset {
            out.notes.push(NoteEvent {
                pitch,
                onset: o.onset,
                duration: at - o.onset,
                channel: ch,
                velocity: o.velocity,
            });
        }
    };

    while !r.at_end() {
        tick += r.vlq("delta time")? as u64;
        let pos = r.offset();
        let mut status = r.u8("event")?;
        if status < 0x80 {
            status = running.ok_or_else(|| MidiError::Malformed {
                pos,
                reason: "running status without a preceding status byte".into(),
            })?;
            r.pos -= 1;
        }
        match status {
            0xff => {
                running = None;
                let kind = r.u8("meta type")?;
                let len = r.vlq("meta length")? as usize;
                let data = r.take(len, "meta event")?;
                match kind {
                    0x2f => break,
                    0x51 if len == 3 => {
                        let t = u32::from_be_bytes([0, data[0], data[1], data[2]]);
                        if t > 0 && out.tempo.is_none() {
                            out.tempo = Some(t);
                        }
                    }
                    0x58 if len >= 2 => {
                        let ts = TimeSignature {
                            numerator: data[0],
                            denominator: 1u8.checked_shl(data[1] as u32).unwrap_or(0),
                        };
                        out.time_signatures.push((tick, ts));
                    }
                    _ => {}
                }
            }
            0xf0 | 0xf7 => {
                running = None;
                let len = r.vlq("sysex length")? as usize;
                r.take(len, "sysex event")?;
            }
            0xf1..=0xfe => {
                return Err(MidiError::Malformed {
                    pos,
                    reason: format!("system message {status:#04x} inside a track"),
                });
            }
            _ => {
                running = Some(status);
                let ch = status & 0x0f;
                match status & 0xf0 {
                    0x80 | 0x90 => {
                        let pitch = r.data_byte()?;
                        let velocity = r.data_byte()?;
                        let key = (ch, pitch);
                        if status & 0xf0 == 0x90 && velocity > 0 {
                            open.entry(key).and_modify(|o| o.depth += 1).or_insert(Open {
                                onset: tick,
                                velocity,
                                depth: 1,
                            });
                        } else if let Some(o) = open.get_mut(&key) {
                            o.depth -= 1;
                            if o.depth == 0 {
                                let o = open.remove(&key).expect("present");
                                close(&mut out, ch, pitch, o, tick);
                            }
                        }
                    }
                    0xa0 | 0xb0 | 0xe0 => {
                        r.data_byte()?;
                        r.data_byte()?;
                    }
                    _ => {
                        r.data_byte()?;
                    }
                }
            }
        }
    }
    out.end_tick = tick;
    let mut dangling: Vec<_> = open.into_iter().collect();
    dangling.sort_by_key(|(k, _)| *k);
    for ((ch, pitch), o) in dangling {
        log::warn!("track {index}: note {pitch} on channel {ch} never released; closing at tick {tick}");
        close(&mut out, ch, pitch, o, tick);
    }
    Ok(out)
}
