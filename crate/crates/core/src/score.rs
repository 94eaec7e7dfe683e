//! Quantized score model: notes on the 24-ticks-per-quarter grid, tracks,
//! measure maps and measure slices.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Grid resolution.
pub const TICKS_PER_QUARTER: u32 = 24;

/// Longest supported measure (8 quarter notes).
pub const MAX_MEASURE_TICKS: u32 = 8 * TICKS_PER_QUARTER;

/// Longest note duration representable in the token language.
pub const MAX_DURATION_TICKS: u32 = 16 * TICKS_PER_QUARTER;

/// Drum tracks use this instrument number.
pub const DRUM_INSTRUMENT: u8 = 128;

/// Onset offsets inside a quarter note that lie on the 32nd-note or
/// 16th-triplet sub-grid.
pub const VALID_ONSET_OFFSETS: [u32; 12] = [0, 3, 4, 6, 8, 9, 12, 15, 16, 18, 20, 21];

const VALID_ONSET_MASK: u32 = {
    let mut mask = 0u32;
    let mut i = 0;
    while i < VALID_ONSET_OFFSETS.len() {
        mask |= 1 << VALID_ONSET_OFFSETS[i];
        i += 1;
    }
    mask
};

/// True when `tick` is one of the 12 valid onset positions of its quarter note.
pub fn is_valid_onset(tick: u32) -> bool {
    VALID_ONSET_MASK & (1 << (tick % TICKS_PER_QUARTER)) != 0
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScoreError {
    #[error("measure range {start}..{end} exceeds the {available} measures available")]
    OutOfBounds {
        start: usize,
        end: usize,
        available: usize,
    },
    #[error("track-measure ({track}, {measure}) is outside a {tracks}x{measures} grid")]
    CellOutOfBounds {
        track: usize,
        measure: usize,
        tracks: usize,
        measures: usize,
    },
    #[error("measure length {0} is outside 1..=192 ticks")]
    BadMeasureLength(u32),
    #[error("invalid note {note:?}: {reason}")]
    BadNote { note: Note, reason: &'static str },
    #[error("instrument {0} is outside 0..=128")]
    BadInstrument(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Note {
    pub pitch: u8,
    pub onset: u32,
    pub duration: u32,
}

impl Note {
    pub fn new(pitch: u8, onset: u32, duration: u32) -> Self {
        Note {
            pitch,
            onset,
            duration,
        }
    }

    pub fn pitch_class(&self) -> u8 {
        self.pitch % 12
    }

    fn check(&self, window: u32) -> Result<(), ScoreError> {
        let reason = if self.pitch > 127 {
            "pitch above 127"
        } else if self.duration == 0 {
            "zero duration"
        } else if self.duration > MAX_DURATION_TICKS {
            "duration above the supported maximum"
        } else if !is_valid_onset(self.onset) {
            "onset off the grid"
        } else if self.onset >= window {
            "onset outside its measure"
        } else {
            return Ok(());
        };
        Err(ScoreError::BadNote {
            note: *self,
            reason,
        })
    }
}

/// Sort notes by (onset, pitch) and merge duplicates on (pitch, onset),
/// keeping the longer duration. Returns the number of merged notes.
pub fn normalize_notes(notes: &mut Vec<Note>) -> usize {
    notes.sort_by(|a, b| {
        (a.onset, a.pitch)
            .cmp(&(b.onset, b.pitch))
            .then(b.duration.cmp(&a.duration))
    });
    let before = notes.len();
    notes.dedup_by(|later, kept| later.onset == kept.onset && later.pitch == kept.pitch);
    before - notes.len()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Track {
    /// General MIDI program, or 128 for drums.
    pub instrument: u8,
    pub name: String,
    pub is_drum: bool,
    /// Sorted by (onset, pitch); absolute ticks.
    pub notes: Vec<Note>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Measure {
    pub start: u32,
    pub length: u32,
}

/// Contiguous, non-overlapping measures starting at tick 0.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MeasureMap {
    measures: Vec<Measure>,
}

impl MeasureMap {
    pub fn from_lengths(lengths: &[u32]) -> Result<Self, ScoreError> {
        let mut start = 0;
        let mut measures = Vec::with_capacity(lengths.len());
        for &length in lengths {
            if length == 0 || length > MAX_MEASURE_TICKS {
                return Err(ScoreError::BadMeasureLength(length));
            }
            measures.push(Measure { start, length });
            start += length;
        }
        Ok(MeasureMap { measures })
    }

    pub fn measures(&self) -> &[Measure] {
        &self.measures
    }

    pub fn len(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }

    pub fn lengths(&self) -> Vec<u32> {
        self.measures.iter().map(|m| m.length).collect()
    }

    pub fn end(&self) -> u32 {
        self.measures.last().map_or(0, |m| m.start + m.length)
    }

    /// Index of the measure containing `tick`.
    pub fn measure_of(&self, tick: u32) -> Option<usize> {
        let idx = self.measures.partition_point(|m| m.start + m.length <= tick);
        (idx < self.measures.len()).then_some(idx)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedScore {
    pub tracks: Vec<Track>,
    pub measure_map: MeasureMap,
}

impl QuantizedScore {
    pub fn num_measures(&self) -> usize {
        self.measure_map.len()
    }

    pub fn note_count(&self) -> usize {
        self.tracks.iter().map(|t| t.notes.len()).sum()
    }

    /// Measure slice `[start, start + n)`.
    pub fn slice(&self, start: usize, n: usize) -> Result<MeasureSlice, ScoreError> {
        let available = self.num_measures();
        let end = start.checked_add(n).filter(|&e| e <= available).ok_or(
            ScoreError::OutOfBounds {
                start,
                end: start.saturating_add(n),
                available,
            },
        )?;
        let measures = &self.measure_map.measures()[start..end];
        let lo = measures.first().map_or(0, |m| m.start);
        let hi = measures.last().map_or(0, |m| m.start + m.length);
        let tracks = self
            .tracks
            .iter()
            .map(|track| {
                let mut cells = vec![Vec::new(); measures.len()];
                let first = track.notes.partition_point(|n| n.onset < lo);
                for note in track.notes[first..].iter().take_while(|n| n.onset < hi) {
                    let m = self.measure_map.measure_of(note.onset).expect("onset inside map") - start;
                    cells[m].push(Note {
                        onset: note.onset - measures[m].start,
                        ..*note
                    });
                }
                SliceTrack {
                    instrument: track.instrument,
                    name: track.name.clone(),
                    is_drum: track.is_drum,
                    cells,
                }
            })
            .collect();
        Ok(MeasureSlice {
            start_measure: start,
            measure_lengths: measures.iter().map(|m| m.length).collect(),
            tracks,
        })
    }

    pub fn full_slice(&self) -> MeasureSlice {
        self.slice(0, self.num_measures()).expect("identity slice")
    }
}

/// One track of a [`MeasureSlice`]: notes grouped per measure, onsets
/// relative to the measure start.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceTrack {
    pub instrument: u8,
    pub name: String,
    pub is_drum: bool,
    pub cells: Vec<Vec<Note>>,
}

impl SliceTrack {
    pub fn new(instrument: u8, cells: Vec<Vec<Note>>) -> Self {
        SliceTrack {
            instrument,
            name: String::new(),
            is_drum: instrument == DRUM_INSTRUMENT,
            cells,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.cells.iter().all(Vec::is_empty)
    }
}

/// A window of consecutive measures addressable as a track x measure grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureSlice {
    /// Index of the first measure in the source score.
    pub start_measure: usize,
    measure_lengths: Vec<u32>,
    tracks: Vec<SliceTrack>,
}

impl MeasureSlice {
    /// Builds a slice from measure-local cells, validating the grid.
    /// Cell notes are normalized (sorted, duplicates merged).
    pub fn new(measure_lengths: Vec<u32>, mut tracks: Vec<SliceTrack>) -> Result<Self, ScoreError> {
        for &len in &measure_lengths {
            if len == 0 || len > MAX_MEASURE_TICKS {
                return Err(ScoreError::BadMeasureLength(len));
            }
        }
        for (t, track) in tracks.iter_mut().enumerate() {
            if track.instrument > DRUM_INSTRUMENT {
                return Err(ScoreError::BadInstrument(track.instrument));
            }
            if track.cells.len() != measure_lengths.len() {
                return Err(ScoreError::CellOutOfBounds {
                    track: t,
                    measure: track.cells.len(),
                    tracks: t + 1,
                    measures: measure_lengths.len(),
                });
            }
            for (cell, &len) in track.cells.iter_mut().zip(&measure_lengths) {
                for note in cell.iter() {
                    note.check(len)?;
                }
                normalize_notes(cell);
            }
        }
        Ok(MeasureSlice {
            start_measure: 0,
            measure_lengths,
            tracks,
        })
    }

    pub fn num_tracks(&self) -> usize {
        self.tracks.len()
    }

    pub fn num_measures(&self) -> usize {
        self.measure_lengths.len()
    }

    pub fn measure_lengths(&self) -> &[u32] {
        &self.measure_lengths
    }

    /// Tick offset of measure `m` from the slice start.
    pub fn measure_offset(&self, m: usize) -> u32 {
        self.measure_lengths[..m].iter().sum()
    }

    pub fn total_ticks(&self) -> u32 {
        self.measure_lengths.iter().sum()
    }

    pub fn tracks(&self) -> &[SliceTrack] {
        &self.tracks
    }

    pub fn track(&self, t: usize) -> &SliceTrack {
        &self.tracks[t]
    }

    /// Notes of track-measure `(t, m)`, onsets relative to the measure start.
    pub fn cell(&self, t: usize, m: usize) -> &[Note] {
        &self.tracks[t].cells[m]
    }

    pub fn check_cell(&self, t: usize, m: usize) -> Result<(), ScoreError> {
        if t < self.num_tracks() && m < self.num_measures() {
            Ok(())
        } else {
            Err(ScoreError::CellOutOfBounds {
                track: t,
                measure: m,
                tracks: self.num_tracks(),
                measures: self.num_measures(),
            })
        }
    }

    /// All notes of a track with onsets relative to the slice start.
    pub fn track_notes(&self, t: usize) -> Vec<Note> {
        let mut offset = 0;
        let mut out = Vec::new();
        for (cell, len) in self.tracks[t].cells.iter().zip(&self.measure_lengths) {
            out.extend(cell.iter().map(|n| Note {
                onset: n.onset + offset,
                ..*n
            }));
            offset += len;
        }
        out
    }

    /// Concatenation of the given measures of track `t`, in the order given.
    pub fn span<I: IntoIterator<Item = usize>>(&self, t: usize, measures: I) -> NoteSpan {
        NoteSpan::from_cells(
            measures
                .into_iter()
                .map(|m| (self.measure_lengths[m], self.cell(t, m))),
        )
    }

    pub fn track_span(&self, t: usize) -> NoteSpan {
        self.span(t, 0..self.num_measures())
    }

    pub fn note_count(&self) -> usize {
        self.tracks
            .iter()
            .flat_map(|t| &t.cells)
            .map(Vec::len)
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.note_count() == 0
    }

    /// Same slice with every note-less track removed.
    pub fn without_empty_tracks(&self) -> MeasureSlice {
        MeasureSlice {
            start_measure: self.start_measure,
            measure_lengths: self.measure_lengths.clone(),
            tracks: self
                .tracks
                .iter()
                .filter(|t| !t.is_empty())
                .cloned()
                .collect(),
        }
    }

    pub(crate) fn cell_mut(&mut self, t: usize, m: usize) -> &mut Vec<Note> {
        &mut self.tracks[t].cells[m]
    }

    /// Assemble the slice into a standalone score starting at tick 0.
    pub fn to_score(&self) -> QuantizedScore {
        let tracks = (0..self.num_tracks())
            .map(|t| {
                let track = &self.tracks[t];
                Track {
                    instrument: track.instrument,
                    name: track.name.clone(),
                    is_drum: track.is_drum,
                    notes: self.track_notes(t),
                }
            })
            .collect();
        QuantizedScore {
            tracks,
            measure_map: MeasureMap::from_lengths(&self.measure_lengths).expect("validated lengths"),
        }
    }
}

/// Notes from one track over a run of ticks (one or more track-measures laid
/// end to end). Onsets are relative to the span start and sorted.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NoteSpan {
    pub length: u32,
    pub notes: Vec<Note>,
}

impl NoteSpan {
    pub fn new(length: u32, mut notes: Vec<Note>) -> Self {
        normalize_notes(&mut notes);
        NoteSpan { length, notes }
    }

    pub fn from_cells<'a, I>(cells: I) -> Self
    where
        I: IntoIterator<Item = (u32, &'a [Note])>,
    {
        let mut length = 0;
        let mut notes = Vec::new();
        for (len, cell) in cells {
            notes.extend(cell.iter().map(|n| Note {
                onset: n.onset + length,
                ..*n
            }));
            length += len;
        }
        NoteSpan { length, notes }
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_measure_score() -> QuantizedScore {
        QuantizedScore {
            tracks: vec![Track {
                instrument: 0,
                name: "piano".into(),
                is_drum: false,
                notes: vec![Note::new(60, 0, 24), Note::new(62, 96, 24), Note::new(64, 120, 24)],
            }],
            measure_map: MeasureMap::from_lengths(&[96, 96]).unwrap(),
        }
    }

    #[test]
    fn valid_onsets_per_quarter() {
        let valid: Vec<u32> = (0..24).filter(|&t| is_valid_onset(t)).collect();
        assert_eq!(valid, VALID_ONSET_OFFSETS);
        assert!(is_valid_onset(24 + 21));
        assert!(!is_valid_onset(24 + 1));
    }

    #[test]
    fn normalize_merges_keeping_longer() {
        let mut notes = vec![Note::new(60, 0, 6), Note::new(60, 0, 24), Note::new(55, 0, 3)];
        assert_eq!(normalize_notes(&mut notes), 1);
        assert_eq!(notes, vec![Note::new(55, 0, 3), Note::new(60, 0, 24)]);
    }

    #[test]
    fn identity_slice_keeps_every_note() {
        let score = two_measure_score();
        let slice = score.full_slice();
        assert_eq!(slice.note_count(), score.note_count());
        assert_eq!(slice.cell(0, 1), &[Note::new(62, 0, 24), Note::new(64, 24, 24)]);
        assert_eq!(slice.track_notes(0), score.tracks[0].notes);
    }

    #[test]
    fn slice_bounds() {
        let score = two_measure_score();
        assert!(matches!(score.slice(1, 2), Err(ScoreError::OutOfBounds { .. })));
        let tail = score.slice(1, 1).unwrap();
        assert_eq!(tail.start_measure, 1);
        assert_eq!(tail.note_count(), 2);
        let empty = score.slice(2, 0).unwrap();
        assert_eq!(empty.note_count(), 0);
    }

    #[test]
    fn slice_over_empty_measures() {
        let mut score = two_measure_score();
        score.measure_map = MeasureMap::from_lengths(&[96, 96, 96, 96]).unwrap();
        let s = score.slice(2, 2).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.num_tracks(), 1);
    }

    #[test]
    fn measure_of_tick() {
        let map = MeasureMap::from_lengths(&[96, 72]).unwrap();
        assert_eq!(map.measure_of(0), Some(0));
        assert_eq!(map.measure_of(95), Some(0));
        assert_eq!(map.measure_of(96), Some(1));
        assert_eq!(map.measure_of(168), None);
    }

    #[test]
    fn slice_new_rejects_off_grid() {
        let err = MeasureSlice::new(vec![96], vec![SliceTrack::new(0, vec![vec![Note::new(60, 1, 3)]])]);
        assert!(matches!(err, Err(ScoreError::BadNote { .. })));
        let err = MeasureSlice::new(vec![96], vec![SliceTrack::new(0, vec![vec![Note::new(60, 96, 3)]])]);
        assert!(matches!(err, Err(ScoreError::BadNote { .. })));
    }

    #[test]
    fn span_concatenates_cells() {
        let slice = two_measure_score().full_slice();
        let span = slice.span(0, [1, 0]);
        assert_eq!(span.length, 192);
        assert_eq!(span.notes[0], Note::new(62, 0, 24));
        assert_eq!(span.notes[2], Note::new(60, 96, 24));
    }
}
