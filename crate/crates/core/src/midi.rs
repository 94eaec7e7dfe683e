//! Standard MIDI file ingestion and grid quantization.
//!
//! Parsing keeps source ticks; [`quantize`] rescales to 24 ticks per quarter,
//! snaps onsets to the mixed 32nd / 16th-triplet grid and builds the measure
//! map from time-signature events.

use std::collections::{BTreeMap, HashMap, VecDeque};

use midly::num::{u15, u28, u4, u7};
use midly::{Format, Header, MetaMessage, MidiMessage, Timing, TrackEvent, TrackEventKind};
use thiserror::Error;

use crate::score::{
    normalize_notes, MeasureMap, Note, QuantizedScore, Track, DRUM_INSTRUMENT, MAX_DURATION_TICKS,
    MAX_MEASURE_TICKS, TICKS_PER_QUARTER, VALID_ONSET_OFFSETS,
};

/// Zero-based channel index of General MIDI channel 10.
pub const DRUM_CHANNEL: u8 = 9;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MidiError {
    #[error("malformed MIDI at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("unsupported MIDI file: {0}")]
    Unsupported(String),
    #[error("measure {measure} is {ticks} ticks long; at most {max} ticks (8 quarter notes) are supported")]
    MeasureTooLong { measure: usize, ticks: u32, max: u32 },
    #[error("time signature {numerator}/{denominator} at tick {tick} does not fit the 24-ticks-per-quarter grid")]
    BadTimeSignature {
        tick: u32,
        numerator: u8,
        denominator: u32,
    },
    #[error("failed to write MIDI: {0}")]
    Write(String),
}

fn malformed(offset: usize, reason: impl Into<String>) -> MidiError {
    MidiError::Malformed {
        offset,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawNote {
    pub pitch: u8,
    /// Source ticks.
    pub onset: u64,
    pub duration: u64,
    /// Carried through ingest only; nothing downstream models it.
    pub velocity: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTrack {
    pub smf_track: usize,
    pub channel: u8,
    /// First program change seen on this (track, channel).
    pub program: u8,
    pub name: String,
    pub is_drum: bool,
    pub notes: Vec<RawNote>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeSignature {
    pub tick: u64,
    pub numerator: u8,
    pub denominator: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawScore {
    pub ppq: u16,
    pub tracks: Vec<RawTrack>,
    pub time_signatures: Vec<TimeSignature>,
    pub warnings: Vec<String>,
}

struct Chunk<'a> {
    offset: usize,
    body: &'a [u8],
}

/// Validates the header and chunk layout, returning the header and the
/// `MTrk` chunks with their byte offsets.
fn scan_chunks(bytes: &[u8]) -> Result<(Header, Vec<Chunk<'_>>, Vec<String>), MidiError> {
    let mut warnings = Vec::new();
    if bytes.len() < 14 {
        return Err(malformed(0, "file shorter than an SMF header"));
    }
    if &bytes[0..4] != b"MThd" {
        return Err(malformed(0, "missing MThd header"));
    }
    let header_len = u32::from_be_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if header_len < 6 || 8 + header_len > bytes.len() {
        return Err(malformed(4, format!("bad header length {header_len}")));
    }
    let format = u16::from_be_bytes([bytes[8], bytes[9]]);
    let ntracks = u16::from_be_bytes([bytes[10], bytes[11]]) as usize;
    let division = u16::from_be_bytes([bytes[12], bytes[13]]);
    let format = match format {
        0 => Format::SingleTrack,
        1 => Format::Parallel,
        2 => return Err(MidiError::Unsupported("SMF type 2".into())),
        other => return Err(malformed(8, format!("unknown SMF format {other}"))),
    };
    if division & 0x8000 != 0 {
        return Err(MidiError::Unsupported("SMPTE time division".into()));
    }
    if division == 0 {
        return Err(malformed(12, "zero ticks per quarter note"));
    }
    let header = Header::new(format, Timing::Metrical(u15::new(division)));

    let mut chunks = Vec::new();
    let mut pos = 8 + header_len;
    while pos < bytes.len() {
        if pos + 8 > bytes.len() {
            return Err(malformed(pos, "truncated chunk header"));
        }
        let kind = &bytes[pos..pos + 4];
        let len = u32::from_be_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        if body_start + len > bytes.len() {
            return Err(malformed(
                pos,
                format!("chunk declares {len} bytes but only {} remain", bytes.len() - body_start),
            ));
        }
        if kind == b"MTrk" {
            chunks.push(Chunk {
                offset: pos,
                body: &bytes[body_start..body_start + len],
            });
        } else if !kind.iter().all(|b| b.is_ascii_graphic()) {
            return Err(malformed(pos, "invalid chunk type"));
        }
        pos = body_start + len;
    }
    if chunks.len() != ntracks {
        warnings.push(format!(
            "header declares {ntracks} tracks, found {}",
            chunks.len()
        ));
    }
    Ok((header, chunks, warnings))
}

/// Parse SMF type 0/1 bytes into per-(track, channel) note lists.
pub fn parse_midi(bytes: &[u8]) -> Result<RawScore, MidiError> {
    let (header, chunks, mut warnings) = scan_chunks(bytes)?;
    let ppq = match header.timing {
        Timing::Metrical(t) => t.as_int(),
        Timing::Timecode(..) => unreachable!("rejected by scan"),
    };

    let mut tracks = Vec::new();
    let mut time_signatures: BTreeMap<u64, TimeSignature> = BTreeMap::new();

    for (smf_track, chunk) in chunks.iter().enumerate() {
        let mut tick: u64 = 0;
        let mut name = String::new();
        let mut open: HashMap<(u8, u8), VecDeque<(u64, u8)>> = HashMap::new();
        let mut per_channel: BTreeMap<u8, RawTrack> = BTreeMap::new();
        let mut programs: HashMap<u8, u8> = HashMap::new();

        for event in midly::EventIter::new(chunk.body) {
            let event = event.map_err(|e| malformed(chunk.offset, e.to_string()))?;
            tick += u64::from(event.delta.as_int());
            match event.kind {
                TrackEventKind::Meta(MetaMessage::TrackName(raw)) if name.is_empty() => {
                    name = String::from_utf8_lossy(raw).trim().to_string();
                }
                TrackEventKind::Meta(MetaMessage::TimeSignature(num, pow, _, _)) => {
                    if pow > 31 || num == 0 {
                        warnings.push(format!("ignored invalid time signature at tick {tick}"));
                        continue;
                    }
                    time_signatures.insert(
                        tick,
                        TimeSignature {
                            tick,
                            numerator: num,
                            denominator: 1u32 << pow,
                        },
                    );
                }
                TrackEventKind::Midi { channel, message } => {
                    let channel = channel.as_int();
                    match message {
                        MidiMessage::ProgramChange { program } => {
                            programs.entry(channel).or_insert(program.as_int());
                        }
                        MidiMessage::NoteOn { key, vel } if vel.as_int() > 0 => {
                            open.entry((channel, key.as_int()))
                                .or_default()
                                .push_back((tick, vel.as_int()));
                        }
                        MidiMessage::NoteOn { key, .. } | MidiMessage::NoteOff { key, .. } => {
                            let pitch = key.as_int();
                            if let Some((onset, velocity)) = open
                                .get_mut(&(channel, pitch))
                                .and_then(VecDeque::pop_front)
                            {
                                channel_track(&mut per_channel, smf_track, channel).notes.push(RawNote {
                                    pitch,
                                    onset,
                                    duration: tick - onset,
                                    velocity,
                                });
                            }
                        }
                        _ => {}
                    }
                }
                _ => {}
            }
        }

        let mut dangling: Vec<_> = open
            .into_iter()
            .flat_map(|((channel, pitch), q)| q.into_iter().map(move |(on, vel)| (channel, pitch, on, vel)))
            .collect();
        dangling.sort_unstable();
        for (channel, pitch, onset, velocity) in dangling {
            warnings.push(format!(
                "track {smf_track} channel {}: note {pitch} at tick {onset} never released; closed at track end",
                channel + 1
            ));
            channel_track(&mut per_channel, smf_track, channel).notes.push(RawNote {
                pitch,
                onset,
                duration: tick - onset,
                velocity,
            });
        }

        for (channel, mut track) in per_channel {
            track.name = name.clone();
            track.program = programs.get(&channel).copied().unwrap_or(0);
            track.notes.sort_by_key(|n| (n.onset, n.pitch));
            tracks.push(track);
        }
    }

    Ok(RawScore {
        ppq,
        tracks,
        time_signatures: time_signatures.into_values().collect(),
        warnings,
    })
}

fn channel_track(map: &mut BTreeMap<u8, RawTrack>, smf_track: usize, channel: u8) -> &mut RawTrack {
    map.entry(channel).or_insert_with(|| RawTrack {
        smf_track,
        channel,
        program: 0,
        name: String::new(),
        is_drum: channel == DRUM_CHANNEL,
        notes: Vec::new(),
    })
}

/// Counts of what quantization changed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QuantizeReport {
    pub snapped: usize,
    pub merged: usize,
    pub clamped_durations: usize,
    pub diagnostics: Vec<String>,
}

/// Rescale a source-tick onset to the grid, snapping to the nearest valid
/// position. Equidistant candidates resolve to the earlier tick.
pub fn snap_onset(source_tick: u64, ppq: u16) -> u32 {
    let ppq = u64::from(ppq);
    let quarter = source_tick / ppq;
    let rem = source_tick % ppq;
    let target = rem * u64::from(TICKS_PER_QUARTER);
    let best = VALID_ONSET_OFFSETS
        .iter()
        .map(|&p| u64::from(p))
        .chain(std::iter::once(u64::from(TICKS_PER_QUARTER)))
        .min_by_key(|&p| (target.abs_diff(p * ppq), p))
        .unwrap();
    (quarter * u64::from(TICKS_PER_QUARTER) + best) as u32
}

fn rescale_round(source: u64, ppq: u16) -> u64 {
    let ppq = u64::from(ppq);
    (source * u64::from(TICKS_PER_QUARTER) * 2 + ppq) / (2 * ppq)
}

/// Ticks per measure for a time signature, if it lands on the grid.
pub fn measure_ticks(numerator: u8, denominator: u32) -> Option<u32> {
    let whole = 4 * TICKS_PER_QUARTER;
    let num = u32::from(numerator) * whole;
    (denominator != 0 && num.is_multiple_of(denominator)).then(|| num / denominator)
}

pub fn quantize(raw: &RawScore) -> Result<QuantizedScore, MidiError> {
    quantize_with_report(raw).map(|(score, _)| score)
}

pub fn quantize_with_report(raw: &RawScore) -> Result<(QuantizedScore, QuantizeReport), MidiError> {
    let mut report = QuantizeReport::default();
    let mut tracks = Vec::new();
    let mut last_onset = 0u32;

    for rt in &raw.tracks {
        let mut notes = Vec::with_capacity(rt.notes.len());
        for n in &rt.notes {
            let onset = snap_onset(n.onset, raw.ppq);
            if u64::from(onset) * u64::from(raw.ppq) != n.onset * u64::from(TICKS_PER_QUARTER) {
                report.snapped += 1;
            }
            let scaled = rescale_round(n.duration, raw.ppq);
            let duration = scaled.clamp(1, u64::from(MAX_DURATION_TICKS)) as u32;
            if u64::from(duration) != scaled {
                report.clamped_durations += 1;
            }
            last_onset = last_onset.max(onset);
            notes.push(Note {
                pitch: n.pitch,
                onset,
                duration,
            });
        }
        let merged = normalize_notes(&mut notes);
        if merged > 0 {
            report.diagnostics.push(format!(
                "track {} channel {}: merged {merged} duplicate (pitch, onset) notes",
                rt.smf_track,
                rt.channel + 1
            ));
        }
        report.merged += merged;
        if notes.is_empty() {
            continue;
        }
        tracks.push(Track {
            instrument: if rt.is_drum { DRUM_INSTRUMENT } else { rt.program },
            name: rt.name.clone(),
            is_drum: rt.is_drum,
            notes,
        });
    }
    if report.snapped > 0 {
        report
            .diagnostics
            .push(format!("snapped {} off-grid onsets", report.snapped));
    }
    if report.clamped_durations > 0 {
        report.diagnostics.push(format!(
            "clamped {} durations into 1..={MAX_DURATION_TICKS} ticks",
            report.clamped_durations
        ));
    }

    let measure_map = build_measure_map(raw, last_onset)?;
    Ok((QuantizedScore { tracks, measure_map }, report))
}

fn build_measure_map(raw: &RawScore, last_onset: u32) -> Result<MeasureMap, MidiError> {
    // (grid tick, measure length) change points
    let mut changes: Vec<(u32, u32)> = Vec::new();
    for ts in &raw.time_signatures {
        let tick = rescale_round(ts.tick, raw.ppq) as u32;
        let len = measure_ticks(ts.numerator, ts.denominator).ok_or(MidiError::BadTimeSignature {
            tick,
            numerator: ts.numerator,
            denominator: ts.denominator,
        })?;
        if changes.last().is_some_and(|&(t, _)| t == tick) {
            changes.pop();
        }
        changes.push((tick, len));
    }
    if changes.first().is_none_or(|&(t, _)| t > 0) {
        changes.insert(0, (0, 4 * TICKS_PER_QUARTER));
    }

    let mut lengths = Vec::new();
    let mut cursor = 0u32;
    let mut next_change = 1;
    let mut current = changes[0].1;
    while cursor <= last_onset {
        while next_change < changes.len() && changes[next_change].0 <= cursor {
            current = changes[next_change].1;
            next_change += 1;
        }
        let mut len = current;
        if let Some(&(at, _)) = changes.get(next_change) {
            if cursor + len > at {
                len = at - cursor;
            }
        }
        if len > MAX_MEASURE_TICKS {
            return Err(MidiError::MeasureTooLong {
                measure: lengths.len(),
                ticks: len,
                max: MAX_MEASURE_TICKS,
            });
        }
        lengths.push(len);
        cursor += len;
    }
    Ok(MeasureMap::from_lengths(&lengths).expect("lengths checked"))
}

/// Parse and quantize in one step.
pub fn load_midi(bytes: &[u8]) -> Result<QuantizedScore, MidiError> {
    quantize(&parse_midi(bytes)?)
}

fn time_signature_for(len: u32) -> Option<(u8, u8)> {
    for pow in 2u8..=5 {
        let den = 1u32 << pow;
        let num = len * den;
        if num.is_multiple_of(4 * TICKS_PER_QUARTER) {
            let n = num / (4 * TICKS_PER_QUARTER);
            return u8::try_from(n).ok().map(|n| (n, pow));
        }
    }
    None
}

/// Write a quantized score as an SMF type 1 file at 24 ticks per quarter.
///
/// Track 0 holds time signatures; each score track gets its own `MTrk`
/// with a name, a program change and its notes. Drums go to channel 10.
pub fn write_midi(score: &QuantizedScore) -> Result<Vec<u8>, MidiError> {
    let header = Header::new(
        Format::Parallel,
        Timing::Metrical(u15::new(TICKS_PER_QUARTER as u16)),
    );

    let mut conductor: Vec<(u32, TrackEventKind)> = Vec::new();
    let mut previous = None;
    for m in score.measure_map.measures() {
        if previous == Some(m.length) {
            continue;
        }
        let (num, pow) = time_signature_for(m.length).ok_or_else(|| {
            MidiError::Write(format!("measure length {} has no time signature", m.length))
        })?;
        conductor.push((m.start, TrackEventKind::Meta(MetaMessage::TimeSignature(num, pow, 24, 8))));
        previous = Some(m.length);
    }

    let mut smf_tracks = vec![to_delta(conductor)];
    let mut melodic_channel = 0u8;
    for track in &score.tracks {
        let channel = if track.is_drum {
            DRUM_CHANNEL
        } else {
            let c = melodic_channel;
            melodic_channel = (melodic_channel + 1) % 15;
            if c >= DRUM_CHANNEL {
                c + 1
            } else {
                c
            }
        };
        let ch = u4::new(channel);
        let mut events: Vec<(u32, u8, TrackEventKind)> = Vec::new();
        if !track.name.is_empty() {
            events.push((0, 0, TrackEventKind::Meta(MetaMessage::TrackName(track.name.as_bytes()))));
        }
        if !track.is_drum {
            events.push((
                0,
                1,
                TrackEventKind::Midi {
                    channel: ch,
                    message: MidiMessage::ProgramChange {
                        program: u7::new(track.instrument.min(127)),
                    },
                },
            ));
        }
        for n in &track.notes {
            let key = u7::new(n.pitch);
            events.push((
                n.onset,
                3,
                TrackEventKind::Midi {
                    channel: ch,
                    message: MidiMessage::NoteOn { key, vel: u7::new(80) },
                },
            ));
            events.push((
                n.onset + n.duration,
                2,
                TrackEventKind::Midi {
                    channel: ch,
                    message: MidiMessage::NoteOff { key, vel: u7::new(0) },
                },
            ));
        }
        // note-offs sort ahead of note-ons at the same tick
        events.sort_by_key(|&(t, rank, _)| (t, rank));
        smf_tracks.push(to_delta(events.into_iter().map(|(t, _, k)| (t, k)).collect()));
    }

    let mut out = Vec::new();
    midly::write_std(&header, smf_tracks.iter(), &mut out).map_err(|e| MidiError::Write(e.to_string()))?;
    Ok(out)
}

fn to_delta(events: Vec<(u32, TrackEventKind<'_>)>) -> Vec<TrackEvent<'_>> {
    let mut last = 0;
    let mut out: Vec<TrackEvent> = events
        .into_iter()
        .map(|(t, kind)| {
            let delta = t - last;
            last = t;
            TrackEvent {
                delta: u28::new(delta),
                kind,
            }
        })
        .collect();
    out.push(TrackEvent {
        delta: u28::new(0),
        kind: TrackEventKind::Meta(MetaMessage::EndOfTrack),
    });
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Hand-assembled SMF builder for tests.
    pub struct SmfBuilder {
        ppq: u16,
        tracks: Vec<Vec<u8>>,
    }

    fn vlq(mut v: u32, out: &mut Vec<u8>) {
        let mut stack = vec![(v & 0x7f) as u8];
        v >>= 7;
        while v > 0 {
            stack.push(((v & 0x7f) as u8) | 0x80);
            v >>= 7;
        }
        out.extend(stack.into_iter().rev());
    }

    impl SmfBuilder {
        pub fn new(ppq: u16) -> Self {
            SmfBuilder { ppq, tracks: Vec::new() }
        }

        /// events: (absolute tick, raw event bytes)
        pub fn track(mut self, mut events: Vec<(u32, Vec<u8>)>) -> Self {
            events.sort_by_key(|e| e.0);
            let mut body = Vec::new();
            let mut last = 0;
            for (t, bytes) in events {
                vlq(t - last, &mut body);
                last = t;
                body.extend(bytes);
            }
            body.extend([0, 0xff, 0x2f, 0]);
            self.tracks.push(body);
            self
        }

        pub fn build(self) -> Vec<u8> {
            let mut out = b"MThd".to_vec();
            out.extend(6u32.to_be_bytes());
            out.extend(1u16.to_be_bytes());
            out.extend((self.tracks.len() as u16).to_be_bytes());
            out.extend(self.ppq.to_be_bytes());
            for t in self.tracks {
                out.extend(b"MTrk");
                out.extend((t.len() as u32).to_be_bytes());
                out.extend(t);
            }
            out
        }
    }

    pub fn note(ch: u8, pitch: u8, on: u32, off: u32) -> Vec<(u32, Vec<u8>)> {
        vec![(on, vec![0x90 | ch, pitch, 100]), (off, vec![0x80 | ch, pitch, 0])]
    }

    pub fn time_sig(tick: u32, num: u8, pow: u8) -> (u32, Vec<u8>) {
        (tick, vec![0xff, 0x58, 4, num, pow, 24, 8])
    }

    #[test]
    fn single_note_file() {
        let bytes = SmfBuilder::new(480).track(note(0, 60, 0, 480)).build();
        let raw = parse_midi(&bytes).unwrap();
        assert_eq!(raw.tracks.len(), 1);
        assert_eq!(raw.tracks[0].notes.len(), 1);
        assert_eq!(raw.tracks[0].notes[0].pitch, 60);
        let score = quantize(&raw).unwrap();
        assert_eq!(score.tracks[0].notes, vec![Note::new(60, 0, 24)]);
        assert_eq!(score.measure_map.lengths(), vec![96]);
    }

    #[test]
    fn channel_ten_is_drums() {
        let bytes = SmfBuilder::new(96).track(note(9, 36, 0, 24)).build();
        let score = load_midi(&bytes).unwrap();
        assert!(score.tracks[0].is_drum);
        assert_eq!(score.tracks[0].instrument, DRUM_INSTRUMENT);
    }

    #[test]
    fn tracks_keyed_by_track_and_channel() {
        let mut ev = note(0, 60, 0, 96);
        ev.extend(note(1, 48, 0, 96));
        ev.push((0, vec![0xc1, 33]));
        ev.push((10, vec![0xc1, 40]));
        let bytes = SmfBuilder::new(96).track(ev).build();
        let score = load_midi(&bytes).unwrap();
        assert_eq!(score.tracks.len(), 2);
        assert_eq!(score.tracks[0].instrument, 0);
        assert_eq!(score.tracks[1].instrument, 33);
    }

    #[test]
    fn overlapping_duplicates_merge_to_longer() {
        // Two overlapping C4s at the same onset on the same channel.
        let mut ev = vec![(0, vec![0x90, 60, 100]), (0, vec![0x90, 60, 90])];
        ev.push((96, vec![0x80, 60, 0]));
        ev.push((384, vec![0x80, 60, 0]));
        let bytes = SmfBuilder::new(96).track(ev).build();
        let raw = parse_midi(&bytes).unwrap();
        // event dump: both notes paired FIFO, durations 96 and 384
        let mut durs: Vec<u64> = raw.tracks[0].notes.iter().map(|n| n.duration).collect();
        durs.sort();
        assert_eq!(durs, vec![96, 384]);
        let (score, report) = quantize_with_report(&raw).unwrap();
        assert_eq!(report.merged, 1);
        assert_eq!(score.tracks[0].notes, vec![Note::new(60, 0, 96)]);
    }

    #[test]
    fn unpaired_note_closed_at_track_end() {
        let ev = vec![(0, vec![0x90, 60, 100]), (192, vec![0xff, 0x01, 1, b'x'])];
        let bytes = SmfBuilder::new(96).track(ev).build();
        let raw = parse_midi(&bytes).unwrap();
        assert_eq!(raw.tracks[0].notes[0].duration, 192);
        assert!(raw.warnings.iter().any(|w| w.contains("never released")));
    }

    #[test]
    fn snapping_examples() {
        assert_eq!(snap_onset(480, 480), 24);
        // 490 -> 24.5 ticks -> 24
        assert_eq!(snap_onset(490, 480), 24);
        // 1.5 ticks sits between 0 and 3 -> tie goes down
        assert_eq!(snap_onset(30, 480), 0);
        // 22.5 ticks: 21 at 1.5, 24 at 1.5 -> 21
        assert_eq!(snap_onset(450, 480), 21);
        assert_eq!(snap_onset(460, 480), 24);
    }

    #[test]
    fn snap_matches_enumeration() {
        for ppq in [96u16, 120, 192, 384, 480, 960] {
            for src in 0..(3 * u64::from(ppq)) {
                let exact = src as f64 * 24.0 / f64::from(ppq);
                let mut best = (f64::INFINITY, 0u32);
                for q in 0..4u32 {
                    for &p in &VALID_ONSET_OFFSETS {
                        let cand = q * 24 + p;
                        let d = (f64::from(cand) - exact).abs();
                        if d < best.0 - 1e-12 {
                            best = (d, cand);
                        }
                    }
                }
                assert_eq!(snap_onset(src, ppq), best.1, "ppq {ppq} src {src}");
            }
        }
    }

    #[test]
    fn nine_four_rejected() {
        let mut ev = note(0, 60, 0, 96);
        ev.push(time_sig(0, 9, 2));
        let bytes = SmfBuilder::new(96).track(ev).build();
        let err = load_midi(&bytes).unwrap_err();
        assert_eq!(err, MidiError::MeasureTooLong { measure: 0, ticks: 216, max: 192 });
    }

    #[test]
    fn time_signature_changes() {
        let mut ev = note(0, 60, 0, 96);
        ev.extend(note(0, 62, 96 + 72, 96 + 96));
        ev.push(time_sig(0, 4, 2));
        ev.push(time_sig(96, 3, 2));
        let score = load_midi(&SmfBuilder::new(24).track(ev).build()).unwrap();
        assert_eq!(score.measure_map.lengths(), vec![96, 72, 72]);
    }

    #[test]
    fn mid_measure_change_truncates() {
        let mut ev = note(0, 60, 0, 96);
        ev.extend(note(0, 62, 200, 210));
        ev.push(time_sig(48, 3, 2));
        let score = load_midi(&SmfBuilder::new(24).track(ev).build()).unwrap();
        assert_eq!(score.measure_map.lengths(), vec![48, 72, 72, 72]);
    }

    #[test]
    fn malformed_inputs_report_offsets() {
        assert!(matches!(parse_midi(b"RIFF"), Err(MidiError::Malformed { offset: 0, .. })));
        let mut bytes = SmfBuilder::new(96).track(note(0, 60, 0, 96)).build();
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(parse_midi(&bytes), Err(MidiError::Malformed { offset: 14, .. })));
        let mut bytes = SmfBuilder::new(96).track(note(0, 60, 0, 96)).build();
        bytes[12] |= 0x80;
        assert!(matches!(parse_midi(&bytes), Err(MidiError::Unsupported(_))));
    }

    #[test]
    fn write_then_read_round_trip() {
        let mut ev = note(0, 60, 0, 48);
        ev.extend(note(0, 64, 48, 96));
        ev.extend(note(9, 36, 0, 12));
        ev.push(time_sig(0, 3, 2));
        ev.push((0, vec![0xc0, 40]));
        let score = load_midi(&SmfBuilder::new(96).track(ev).build()).unwrap();
        let again = load_midi(&write_midi(&score).unwrap()).unwrap();
        assert_eq!(again.measure_map, score.measure_map);
        assert_eq!(again.tracks.len(), score.tracks.len());
        for (a, b) in again.tracks.iter().zip(&score.tracks) {
            assert_eq!(a.notes, b.notes);
            assert_eq!(a.instrument, b.instrument);
        }
    }
}
