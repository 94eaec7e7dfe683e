//! Measurement reports for whole tracks and single track-measures.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::measure::{self, dnoc_flags, pitch_range, MeasurementKind, PitchRange};
use crate::score::{MeasureSlice, NoteSpan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementReport {
    pub value: f64,
    pub bin: u8,
    pub label: String,
}

/// Keys are measurement names; undefined measurements map to `null`.
pub type Measurements = BTreeMap<String, Option<MeasurementReport>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub measure: usize,
    pub length: u32,
    pub note_count: usize,
    pub measurements: Measurements,
    pub pitch_range: Option<PitchRange>,
    pub dnoc: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackReport {
    pub track: usize,
    pub instrument: u8,
    pub name: String,
    pub is_drum: bool,
    pub note_count: usize,
    pub measurements: Measurements,
    pub pitch_range: Option<PitchRange>,
    pub dnoc_flags: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_measure: Option<Vec<MeasureReport>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub num_measures: usize,
    pub measure_lengths: Vec<u32>,
    pub tracks: Vec<TrackReport>,
}

pub fn measurements(span: &NoteSpan) -> Measurements {
    MeasurementKind::ALL
        .into_iter()
        .map(|kind| {
            let report = measure::measure(kind, span).ok().map(|m| MeasurementReport {
                value: m.value(),
                bin: m.bin(),
                label: m.label().to_string(),
            });
            (kind.name().to_string(), report)
        })
        .collect()
}

pub fn analyze(slice: &MeasureSlice, per_measure: bool) -> AnalysisReport {
    let flags = dnoc_flags(slice);
    let tracks = (0..slice.num_tracks())
        .map(|t| {
            let track = slice.track(t);
            let span = slice.track_span(t);
            let per_measure = per_measure.then(|| {
                (0..slice.num_measures())
                    .map(|m| {
                        let cell = slice.span(t, [m]);
                        MeasureReport {
                            measure: m,
                            length: slice.measure_lengths()[m],
                            note_count: cell.notes.len(),
                            measurements: measurements(&cell),
                            pitch_range: pitch_range(&cell).ok(),
                            dnoc: flags[t][m],
                        }
                    })
                    .collect()
            });
            TrackReport {
                track: t,
                instrument: track.instrument,
                name: track.name.clone(),
                is_drum: track.is_drum,
                note_count: span.notes.len(),
                measurements: measurements(&span),
                pitch_range: pitch_range(&span).ok(),
                dnoc_flags: flags[t].clone(),
                per_measure,
            }
        })
        .collect();
    AnalysisReport {
        num_measures: slice.num_measures(),
        measure_lengths: slice.measure_lengths().to_vec(),
        tracks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{Note, SliceTrack};

    #[test]
    fn monophonic_vertical_bin_zero() {
        let cells = vec![
            vec![Note::new(60, 0, 24), Note::new(62, 24, 24)],
            vec![Note::new(64, 0, 96)],
        ];
        let s = MeasureSlice::new(vec![96, 96], vec![SliceTrack::new(0, cells)]).unwrap();
        let r = analyze(&s, true);
        let t = &r.tracks[0];
        assert_eq!(t.measurements.len(), 6);
        assert_eq!(t.measurements["vertical_density"].as_ref().unwrap().bin, 0);
        for m in t.per_measure.as_ref().unwrap() {
            assert_eq!(m.measurements["vertical_density"].as_ref().unwrap().bin, 0);
        }
        // single chord in measure 1: no transitions
        let pm = &t.per_measure.as_ref().unwrap()[1];
        assert!(pm.measurements["step_propensity"].is_none());
        assert_eq!(t.pitch_range, Some(PitchRange { low: 60, high: 64 }));
        assert_eq!(t.dnoc_flags, vec![true, true]);
        let json = serde_json::to_value(&r).unwrap();
        let keys: Vec<&String> = json["tracks"][0].as_object().unwrap().keys().collect();
        assert!(keys.iter().any(|k| *k == "dnoc_flags") && keys.iter().any(|k| *k == "pitch_range"));
    }
}
