//! Control measurements over track-measure collections and their bins.
//!
//! Every function here takes a [`NoteSpan`]: the notes of one track over one
//! or more track-measures laid end to end.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::score::{MeasureSlice, Note, NoteSpan};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MeasureError {
    #[error("{kind} needs a span of at least {needed} ticks, got {got}")]
    SpanTooShort {
        kind: &'static str,
        needed: u32,
        got: u32,
    },
    #[error("{kind} is undefined: {reason}")]
    Undefined {
        kind: &'static str,
        reason: &'static str,
    },
    #[error("chord distance needs two non-empty chords")]
    EmptyChord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementKind {
    HorizontalDensity,
    RhythmicInterest,
    VerticalDensity,
    PitchClassesPerOnset,
    StepPropensity,
    LeapPropensity,
}

const HORIZONTAL_EDGES: [f64; 5] = [1.0 / 48.0, 1.0 / 24.0, 1.0 / 12.0, 1.0 / 6.0, 0.1875];
const INTEREST_EDGES: [f64; 2] = [0.14, 0.4];
const VERTICAL_EDGES: [f64; 4] = [1.0, 2.0, 3.0, 4.0];
const PROPENSITY_EDGES: [f64; 6] = [0.01, 0.2, 0.4, 0.6, 0.8, 0.99];

const HORIZONTAL_LABELS: [&str; 6] = [
    "less than half notes",
    "[half notes, quarter notes)",
    "[quarter notes, eighth notes)",
    "[eighth notes, 16th notes)",
    "[16th notes, 4.5 onsets per quarter)",
    ">= 4.5 onsets per quarter",
];
const INTEREST_LABELS: [&str; 3] = ["low", "medium", "high"];
const VERTICAL_LABELS: [&str; 5] = ["1", "(1, 2]", "(2, 3]", "(3, 4]", "> 4"];
const PROPENSITY_LABELS: [&str; 7] = [
    "[0, 0.01)",
    "[0.01, 0.2)",
    "[0.2, 0.4)",
    "[0.4, 0.6)",
    "[0.6, 0.8)",
    "[0.8, 0.99)",
    "[0.99, 1]",
];

impl MeasurementKind {
    pub const ALL: [MeasurementKind; 6] = [
        MeasurementKind::HorizontalDensity,
        MeasurementKind::RhythmicInterest,
        MeasurementKind::VerticalDensity,
        MeasurementKind::PitchClassesPerOnset,
        MeasurementKind::StepPropensity,
        MeasurementKind::LeapPropensity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeasurementKind::HorizontalDensity => "horizontal_density",
            MeasurementKind::RhythmicInterest => "rhythmic_interest",
            MeasurementKind::VerticalDensity => "vertical_density",
            MeasurementKind::PitchClassesPerOnset => "pitch_classes_per_onset",
            MeasurementKind::StepPropensity => "step_propensity",
            MeasurementKind::LeapPropensity => "leap_propensity",
        }
    }

    pub fn num_bins(self) -> u8 {
        self.labels().len() as u8
    }

    pub fn labels(self) -> &'static [&'static str] {
        match self {
            MeasurementKind::HorizontalDensity => &HORIZONTAL_LABELS,
            MeasurementKind::RhythmicInterest => &INTEREST_LABELS,
            MeasurementKind::VerticalDensity | MeasurementKind::PitchClassesPerOnset => &VERTICAL_LABELS,
            MeasurementKind::StepPropensity | MeasurementKind::LeapPropensity => &PROPENSITY_LABELS,
        }
    }

    pub fn bin_label(self, bin: u8) -> &'static str {
        self.labels()[bin as usize]
    }

    /// Bin index for a measured value.
    ///
    /// Horizontal density, interest and propensity bins are left-closed;
    /// vertical density and pitch classes per onset are right-closed.
    pub fn bin(self, value: f64) -> u8 {
        let count = match self {
            MeasurementKind::HorizontalDensity => HORIZONTAL_EDGES.iter().filter(|&&e| value >= e).count(),
            MeasurementKind::RhythmicInterest => INTEREST_EDGES.iter().filter(|&&e| value >= e).count(),
            MeasurementKind::VerticalDensity | MeasurementKind::PitchClassesPerOnset => {
                VERTICAL_EDGES.iter().filter(|&&e| value > e).count()
            }
            MeasurementKind::StepPropensity | MeasurementKind::LeapPropensity => {
                PROPENSITY_EDGES.iter().filter(|&&e| value >= e).count()
            }
        };
        count as u8
    }
}

/// A measured value and its bin. The bin is always derived from the value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    kind: MeasurementKind,
    value: f64,
    bin: u8,
}

impl Measurement {
    pub fn new(kind: MeasurementKind, value: f64) -> Self {
        Measurement {
            kind,
            value,
            bin: kind.bin(value),
        }
    }

    pub fn kind(&self) -> MeasurementKind {
        self.kind
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn bin(&self) -> u8 {
        self.bin
    }

    pub fn label(&self) -> &'static str {
        self.kind.bin_label(self.bin)
    }
}

/// Distinct onset ticks in ascending order.
fn onset_ticks(span: &NoteSpan) -> Vec<u32> {
    let mut ticks: Vec<u32> = span.notes.iter().map(|n| n.onset).collect();
    ticks.sort_unstable();
    ticks.dedup();
    ticks
}

pub fn rhythm_vector(span: &NoteSpan) -> Vec<u8> {
    let mut v = vec![0u8; span.length as usize];
    for n in &span.notes {
        if let Some(slot) = v.get_mut(n.onset as usize) {
            *slot = 1;
        }
    }
    v
}

pub fn horizontal_density(span: &NoteSpan) -> Result<Measurement, MeasureError> {
    if span.length == 0 {
        return Err(MeasureError::SpanTooShort {
            kind: "horizontal_density",
            needed: 1,
            got: 0,
        });
    }
    let onsets = onset_ticks(span).len();
    Ok(Measurement::new(
        MeasurementKind::HorizontalDensity,
        onsets as f64 / f64::from(span.length),
    ))
}

/// Rhythmic interest from onset positions alone.
///
/// With `k` onsets over `L` ticks, the centered autocorrelation at shift `s`
/// is `c(s) - k^2/L`, where `c(s)` counts onset pairs `s` ticks apart
/// (cyclically), and `||v - mean||^2 = k - k^2/L`. Scaling both by `L` keeps
/// the maximisation in integers.
pub fn rhythmic_interest_value(onsets: &[u32], length: u32) -> f64 {
    let k = onsets.len() as i64;
    let len = i64::from(length);
    let norm = k * len - k * k;
    if norm == 0 {
        return 0.0;
    }
    let mut pairs = vec![0i64; length as usize];
    for &a in onsets {
        for &b in onsets {
            if a != b {
                let s = (i64::from(b) - i64::from(a)).rem_euclid(len);
                pairs[s as usize] += 1;
            }
        }
    }
    let uniformity = pairs[1..]
        .iter()
        .map(|&c| (c * len - k * k).abs())
        .max()
        .unwrap_or(0);
    if uniformity >= norm {
        0.0
    } else {
        1.0 - uniformity as f64 / norm as f64
    }
}

pub fn rhythmic_interest(span: &NoteSpan) -> Result<Measurement, MeasureError> {
    if span.length < 2 {
        return Err(MeasureError::SpanTooShort {
            kind: "rhythmic_interest",
            needed: 2,
            got: span.length,
        });
    }
    let onsets = onset_ticks(span);
    Ok(Measurement::new(
        MeasurementKind::RhythmicInterest,
        rhythmic_interest_value(&onsets, span.length),
    ))
}

/// Notes grouped by onset tick, in tick order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chord {
    pub onset: u32,
    pub pitches: Vec<u8>,
}

pub fn chords(span: &NoteSpan) -> Vec<Chord> {
    let mut notes: Vec<&Note> = span.notes.iter().collect();
    notes.sort_by_key(|n| (n.onset, n.pitch));
    let mut out: Vec<Chord> = Vec::new();
    for n in notes {
        match out.last_mut() {
            Some(c) if c.onset == n.onset => {
                if !c.pitches.contains(&n.pitch) {
                    c.pitches.push(n.pitch)
                }
            }
            _ => out.push(Chord {
                onset: n.onset,
                pitches: vec![n.pitch],
            }),
        }
    }
    out
}

fn vertical_like(
    span: &NoteSpan,
    kind: MeasurementKind,
    per_tick: impl Fn(&Chord) -> usize,
) -> Result<Measurement, MeasureError> {
    let chords = chords(span);
    if chords.is_empty() {
        return Err(MeasureError::Undefined {
            kind: kind.name(),
            reason: "no note onsets",
        });
    }
    let total: usize = chords.iter().map(per_tick).sum();
    Ok(Measurement::new(kind, total as f64 / chords.len() as f64))
}

pub fn vertical_density(span: &NoteSpan) -> Result<Measurement, MeasureError> {
    vertical_like(span, MeasurementKind::VerticalDensity, |c| c.pitches.len())
}

pub fn pitch_classes_per_onset(span: &NoteSpan) -> Result<Measurement, MeasureError> {
    vertical_like(span, MeasurementKind::PitchClassesPerOnset, |c| {
        c.pitches.iter().map(|p| p % 12).collect::<BTreeSet<_>>().len()
    })
}

/// Sum over `from` of the smallest pitch movement into `to`.
fn movement_sum(from: &[u8], to: &[u8]) -> u32 {
    from.iter()
        .map(|&a| to.iter().map(|&b| u32::from(a.abs_diff(b))).min().unwrap_or(0))
        .sum()
}

/// Average minimum pitch movement from `from` to `to`. Not symmetric.
pub fn chord_distance(from: &[u8], to: &[u8]) -> Result<f64, MeasureError> {
    if from.is_empty() || to.is_empty() {
        return Err(MeasureError::EmptyChord);
    }
    Ok(f64::from(movement_sum(from, to)) / from.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MotionCounts {
    pub repetitions: usize,
    pub steps: usize,
    pub leaps: usize,
}

impl MotionCounts {
    pub fn transitions(&self) -> usize {
        self.repetitions + self.steps + self.leaps
    }
}

pub fn motion_counts(span: &NoteSpan) -> MotionCounts {
    let chords = chords(span);
    let mut counts = MotionCounts::default();
    for pair in chords.windows(2) {
        let from = &pair[0].pitches;
        let sum = movement_sum(from, &pair[1].pitches);
        // step iff 0 < sum / |from| <= 2
        if sum == 0 {
            counts.repetitions += 1;
        } else if sum as usize <= 2 * from.len() {
            counts.steps += 1;
        } else {
            counts.leaps += 1;
        }
    }
    counts
}

/// Step and leap propensities over consecutive chords.
pub fn step_leap_propensity(span: &NoteSpan) -> Result<(Measurement, Measurement), MeasureError> {
    let counts = motion_counts(span);
    let n = counts.transitions();
    if n == 0 {
        return Err(MeasureError::Undefined {
            kind: "step_propensity",
            reason: "fewer than two chords",
        });
    }
    Ok((
        Measurement::new(MeasurementKind::StepPropensity, counts.steps as f64 / n as f64),
        Measurement::new(MeasurementKind::LeapPropensity, counts.leaps as f64 / n as f64),
    ))
}

/// Compute a single measurement kind.
pub fn measure(kind: MeasurementKind, span: &NoteSpan) -> Result<Measurement, MeasureError> {
    match kind {
        MeasurementKind::HorizontalDensity => horizontal_density(span),
        MeasurementKind::RhythmicInterest => rhythmic_interest(span),
        MeasurementKind::VerticalDensity => vertical_density(span),
        MeasurementKind::PitchClassesPerOnset => pitch_classes_per_onset(span),
        MeasurementKind::StepPropensity => step_leap_propensity(span).map(|(s, _)| s),
        MeasurementKind::LeapPropensity => step_leap_propensity(span).map(|(_, l)| l).map_err(|_| {
            MeasureError::Undefined {
                kind: "leap_propensity",
                reason: "fewer than two chords",
            }
        }),
    }
}

/// Note onset chromagram: (pitch class, onset tick) pairs.
pub type Chromagram = BTreeSet<(u8, u32)>;

pub fn chromagram(notes: &[Note]) -> Chromagram {
    notes.iter().map(|n| (n.pitch % 12, n.onset)).collect()
}

/// Whether a non-empty chromagram differs from every non-empty one in `others`.
pub fn differs_from_all<'a, I>(own: &Chromagram, others: I) -> bool
where
    I: IntoIterator<Item = &'a Chromagram>,
{
    !own.is_empty() && others.into_iter().filter(|c| !c.is_empty()).all(|c| c != own)
}

/// DNOC flag per track-measure, indexed `[track][measure]`.
pub fn dnoc_flags(slice: &MeasureSlice) -> Vec<Vec<bool>> {
    let grams: Vec<Vec<Chromagram>> = (0..slice.num_tracks())
        .map(|t| (0..slice.num_measures()).map(|m| chromagram(slice.cell(t, m))).collect())
        .collect();
    (0..slice.num_tracks())
        .map(|t| {
            (0..slice.num_measures())
                .map(|m| {
                    let others = (0..slice.num_tracks()).filter(|&o| o != t).map(|o| &grams[o][m]);
                    differs_from_all(&grams[t][m], others)
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PitchRange {
    pub low: u8,
    pub high: u8,
}

pub fn pitch_range(span: &NoteSpan) -> Result<PitchRange, MeasureError> {
    let low = span.notes.iter().map(|n| n.pitch).min();
    let high = span.notes.iter().map(|n| n.pitch).max();
    match (low, high) {
        (Some(low), Some(high)) => Ok(PitchRange { low, high }),
        _ => Err(MeasureError::Undefined {
            kind: "pitch_range",
            reason: "no notes",
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RhythmMode {
    #[serde(rename = "1d")]
    OneD,
    #[serde(rename = "2d")]
    TwoD,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OnsetCounts {
    pub notes: u32,
    pub pitch_classes: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RhythmEntry {
    pub onset: u32,
    /// Longest duration among notes starting here.
    pub duration: u32,
    /// Present in 2D mode.
    pub counts: Option<OnsetCounts>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RhythmInfo {
    pub mode: RhythmMode,
    pub entries: Vec<RhythmEntry>,
}

pub fn rhythm_info(span: &NoteSpan, mode: RhythmMode) -> RhythmInfo {
    let mut notes: Vec<&Note> = span.notes.iter().collect();
    notes.sort_by_key(|n| n.onset);
    let entries = notes
        .chunk_by(|a, b| a.onset == b.onset)
        .map(|group| {
            let counts = (mode == RhythmMode::TwoD).then(|| OnsetCounts {
                notes: group.len() as u32,
                pitch_classes: group.iter().map(|n| n.pitch % 12).collect::<BTreeSet<_>>().len() as u32,
            });
            RhythmEntry {
                onset: group[0].onset,
                duration: group.iter().map(|n| n.duration).max().unwrap_or(1),
                counts,
            }
        })
        .collect();
    RhythmInfo { mode, entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::SliceTrack;

    fn span(length: u32, notes: &[(u8, u32)]) -> NoteSpan {
        NoteSpan::new(length, notes.iter().map(|&(p, o)| Note::new(p, o, 6)).collect())
    }

    fn every(step: u32, len: u32) -> Vec<(u8, u32)> {
        (0..len).step_by(step as usize).map(|t| (60, t)).collect()
    }

    #[test]
    fn horizontal_density_examples() {
        let quarters = horizontal_density(&span(96, &every(24, 96))).unwrap();
        assert_eq!(quarters.value(), 1.0 / 24.0);
        assert_eq!(quarters.bin(), 2);
        let silent = horizontal_density(&span(96, &[])).unwrap();
        assert_eq!((silent.value(), silent.bin()), (0.0, 0));
        assert_eq!(horizontal_density(&span(96, &every(6, 96))).unwrap().bin(), 4);
        assert!(horizontal_density(&span(0, &[])).is_err());
    }

    #[test]
    fn interest_examples() {
        let eighths = rhythmic_interest(&span(96, &every(12, 96))).unwrap();
        assert_eq!(eighths.value(), 0.0);
        assert_eq!(eighths.bin(), 0);
        let silent = rhythmic_interest(&span(96, &[])).unwrap();
        assert_eq!(silent.value(), 0.0);
        assert!(rhythmic_interest(&span(1, &[])).is_err());
    }

    #[test]
    fn vertical_examples() {
        let mono = vertical_density(&span(96, &every(24, 96))).unwrap();
        assert_eq!((mono.value(), mono.bin()), (1.0, 0));
        let triads: Vec<_> = (0..4u32).flat_map(|i| [(60, i * 24), (64, i * 24), (67, i * 24)]).collect();
        let t = vertical_density(&span(96, &triads)).unwrap();
        assert_eq!((t.value(), t.bin()), (3.0, 2));
        let mixed = span(96, &[(60, 0), (48, 24), (52, 24), (55, 24), (60, 24)]);
        let m = vertical_density(&mixed).unwrap();
        assert_eq!((m.value(), m.bin()), (2.5, 2));
        assert!(matches!(vertical_density(&span(96, &[])), Err(MeasureError::Undefined { .. })));
    }

    #[test]
    fn pitch_class_examples() {
        let octaves: Vec<_> = (0..4u32).flat_map(|i| [(48, i * 24), (60, i * 24)]).collect();
        let o = pitch_classes_per_onset(&span(96, &octaves)).unwrap();
        assert_eq!((o.value(), o.bin()), (1.0, 0));
        let doubled: Vec<_> = (0..4u32)
            .flat_map(|i| [(48, i * 24), (60, i * 24), (64, i * 24), (67, i * 24)])
            .collect();
        let s = span(96, &doubled);
        assert_eq!(vertical_density(&s).unwrap().value(), 4.0);
        assert_eq!(pitch_classes_per_onset(&s).unwrap().value(), 3.0);
    }

    #[test]
    fn chord_distance_examples() {
        assert_eq!(chord_distance(&[60], &[62]).unwrap(), 2.0);
        assert_eq!(chord_distance(&[60, 64, 67], &[60, 64, 67]).unwrap(), 0.0);
        assert!((chord_distance(&[60, 64, 67], &[62, 65, 69]).unwrap() - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!(chord_distance(&[], &[60]), Err(MeasureError::EmptyChord));
        // asymmetric: {60} -> {60, 72} is 0, the reverse is 6
        assert_eq!(chord_distance(&[60], &[60, 72]).unwrap(), 0.0);
        assert_eq!(chord_distance(&[60, 72], &[60]).unwrap(), 6.0);
    }

    #[test]
    fn propensity_examples() {
        let chromatic: Vec<_> = (0..12u8).map(|i| (60 + i, u32::from(i) * 6)).collect();
        let (s, l) = step_leap_propensity(&span(96, &chromatic)).unwrap();
        assert_eq!((s.value(), s.bin(), l.value(), l.bin()), (1.0, 6, 0.0, 0));
        let (s, l) = step_leap_propensity(&span(96, &every(24, 96))).unwrap();
        assert_eq!((s.value(), s.bin(), l.value(), l.bin()), (0.0, 0, 0.0, 0));
        let line = span(96, &[(60, 0), (64, 24), (62, 48), (60, 72)]);
        let (s, l) = step_leap_propensity(&line).unwrap();
        assert_eq!((s.value(), s.bin()), (2.0 / 3.0, 4));
        assert_eq!((l.value(), l.bin()), (1.0 / 3.0, 2));
        assert!(step_leap_propensity(&span(96, &[(60, 0), (64, 0)])).is_err());
    }

    #[test]
    fn chromagram_octave_invariant() {
        let a = [Note::new(60, 0, 6), Note::new(64, 12, 6)];
        let b = [Note::new(72, 0, 6), Note::new(52, 12, 6)];
        assert_eq!(chromagram(&a), chromagram(&b));
        assert!(chromagram(&[]).is_empty());
    }

    fn slice(tracks: Vec<Vec<Vec<Note>>>) -> MeasureSlice {
        let measures = tracks[0].len();
        MeasureSlice::new(
            vec![96; measures],
            tracks.into_iter().map(|cells| SliceTrack::new(0, cells)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn dnoc_single_track_and_octaves() {
        let single = slice(vec![vec![vec![Note::new(60, 0, 6)], vec![]]]);
        assert_eq!(dnoc_flags(&single), vec![vec![true, false]]);

        let ostinato = |base: u8| vec![vec![Note::new(base, 0, 6), Note::new(base + 7, 12, 6)]];
        let octaves = slice(vec![ostinato(48), ostinato(60)]);
        assert_eq!(dnoc_flags(&octaves), vec![vec![false], vec![false]]);

        let other = slice(vec![
            vec![vec![Note::new(60, 0, 6), Note::new(64, 24, 6), Note::new(67, 48, 6)]],
            vec![vec![Note::new(36, 0, 6), Note::new(36, 36, 6)]],
        ]);
        assert_eq!(dnoc_flags(&other), vec![vec![true], vec![true]]);

        // empty neighbours never suppress the flag
        let with_empty = slice(vec![vec![vec![Note::new(60, 0, 6)]], vec![vec![]]]);
        assert_eq!(dnoc_flags(&with_empty), vec![vec![true], vec![false]]);
    }

    #[test]
    fn range_examples() {
        assert_eq!(pitch_range(&span(96, &[(60, 0)])).unwrap(), PitchRange { low: 60, high: 60 });
        let r = pitch_range(&span(96, &[(48, 0), (60, 24), (72, 48)])).unwrap();
        assert_eq!((r.low, r.high), (48, 72));
        assert!(pitch_range(&span(96, &[])).is_err());
    }

    #[test]
    fn rhythm_info_examples() {
        let one = rhythm_info(&span(96, &[(60, 12)]), RhythmMode::OneD);
        assert_eq!(one.entries, vec![RhythmEntry { onset: 12, duration: 6, counts: None }]);

        let s = NoteSpan::new(96, vec![Note::new(60, 0, 6), Note::new(64, 0, 24)]);
        let info = rhythm_info(&s, RhythmMode::OneD);
        assert_eq!(info.entries.len(), 1);
        assert_eq!(info.entries[0].duration, 24);

        let s = NoteSpan::new(96, vec![Note::new(48, 0, 6), Note::new(60, 0, 6), Note::new(64, 0, 6)]);
        let info = rhythm_info(&s, RhythmMode::TwoD);
        assert_eq!(info.entries[0].counts, Some(OnsetCounts { notes: 3, pitch_classes: 2 }));
    }

    #[test]
    fn quantizers_monotone() {
        for kind in MeasurementKind::ALL {
            let mut last = 0;
            for i in 0..=5000 {
                let v = f64::from(i) / 1000.0;
                let b = kind.bin(v);
                assert!(b >= last);
                assert!(b < kind.num_bins());
                last = b;
            }
        }
    }
}
