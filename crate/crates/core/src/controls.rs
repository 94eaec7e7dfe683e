//! Control values: binned measurements, DNOC and pitch ranges, with their
//! token forms and the range predicates used for compliance.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::{self, MeasureError, MeasurementKind, PitchRange};
use crate::score::{Note, NoteSpan};
use crate::tokens::Token;

/// Loose ranges need a note within this many semitones of each extreme.
pub const LOOSE_RANGE_SLACK: u8 = 7;

/// Control families, in prompt emission order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlFamily {
    Horiz,
    Interest,
    Vert,
    Pcs,
    Step,
    Leap,
    Dnoc,
    StrictRange,
    LooseRange,
}

impl ControlFamily {
    pub const ALL: [ControlFamily; 9] = [
        ControlFamily::Horiz,
        ControlFamily::Interest,
        ControlFamily::Vert,
        ControlFamily::Pcs,
        ControlFamily::Step,
        ControlFamily::Leap,
        ControlFamily::Dnoc,
        ControlFamily::StrictRange,
        ControlFamily::LooseRange,
    ];

    pub const TRACK_LEVEL: [ControlFamily; 8] = [
        ControlFamily::Horiz,
        ControlFamily::Interest,
        ControlFamily::Vert,
        ControlFamily::Pcs,
        ControlFamily::Step,
        ControlFamily::Leap,
        ControlFamily::StrictRange,
        ControlFamily::LooseRange,
    ];

    pub const CELL_LEVEL: [ControlFamily; 5] = [
        ControlFamily::Horiz,
        ControlFamily::Vert,
        ControlFamily::Pcs,
        ControlFamily::Dnoc,
        ControlFamily::StrictRange,
    ];

    pub fn allowed_per_track(self) -> bool {
        Self::TRACK_LEVEL.contains(&self)
    }

    pub fn allowed_per_cell(self) -> bool {
        Self::CELL_LEVEL.contains(&self)
    }

    pub fn name(self) -> &'static str {
        match self {
            ControlFamily::Horiz => "horiz",
            ControlFamily::Interest => "interest",
            ControlFamily::Vert => "vert",
            ControlFamily::Pcs => "pcs",
            ControlFamily::Step => "step",
            ControlFamily::Leap => "leap",
            ControlFamily::Dnoc => "dnoc",
            ControlFamily::StrictRange => "strict_range",
            ControlFamily::LooseRange => "loose_range",
        }
    }

    pub fn from_name(name: &str) -> Option<ControlFamily> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn measurement(self) -> Option<MeasurementKind> {
        match self {
            ControlFamily::Horiz => Some(MeasurementKind::HorizontalDensity),
            ControlFamily::Interest => Some(MeasurementKind::RhythmicInterest),
            ControlFamily::Vert => Some(MeasurementKind::VerticalDensity),
            ControlFamily::Pcs => Some(MeasurementKind::PitchClassesPerOnset),
            ControlFamily::Step => Some(MeasurementKind::StepPropensity),
            ControlFamily::Leap => Some(MeasurementKind::LeapPropensity),
            _ => None,
        }
    }

    fn from_measurement(kind: MeasurementKind) -> ControlFamily {
        match kind {
            MeasurementKind::HorizontalDensity => ControlFamily::Horiz,
            MeasurementKind::RhythmicInterest => ControlFamily::Interest,
            MeasurementKind::VerticalDensity => ControlFamily::Vert,
            MeasurementKind::PitchClassesPerOnset => ControlFamily::Pcs,
            MeasurementKind::StepPropensity => ControlFamily::Step,
            MeasurementKind::LeapPropensity => ControlFamily::Leap,
        }
    }
}

impl fmt::Display for ControlFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Control {
    Binned { kind: MeasurementKind, bin: u8 },
    Dnoc,
    StrictRange { low: u8, high: u8 },
    LooseRange { low: u8, high: u8 },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ControlError {
    #[error("token {offset}: `{token}` is not a control token")]
    NotAControl { offset: usize, token: String },
    #[error("token {offset}: range marker must be followed by a pitch")]
    MissingRangePitch { offset: usize },
    #[error("token {offset}: range marker `{token}` without its partner")]
    UnpairedRange { offset: usize, token: String },
    #[error("range low {low} above high {high}")]
    InvertedRange { low: u8, high: u8 },
}

impl Control {
    pub fn binned(kind: MeasurementKind, bin: u8) -> Control {
        Control::Binned { kind, bin }
    }

    pub fn family(&self) -> ControlFamily {
        match *self {
            Control::Binned { kind, .. } => ControlFamily::from_measurement(kind),
            Control::Dnoc => ControlFamily::Dnoc,
            Control::StrictRange { .. } => ControlFamily::StrictRange,
            Control::LooseRange { .. } => ControlFamily::LooseRange,
        }
    }

    pub fn to_tokens(&self) -> Vec<Token> {
        match *self {
            Control::Binned { kind, bin } => vec![match kind {
                MeasurementKind::HorizontalDensity => Token::Horiz(bin),
                MeasurementKind::RhythmicInterest => Token::Interest(bin),
                MeasurementKind::VerticalDensity => Token::Vert(bin),
                MeasurementKind::PitchClassesPerOnset => Token::Pcs(bin),
                MeasurementKind::StepPropensity => Token::Step(bin),
                MeasurementKind::LeapPropensity => Token::Leap(bin),
            }],
            Control::Dnoc => vec![Token::Dnoc],
            Control::StrictRange { low, high } => vec![
                Token::RangeHighStrict,
                Token::NoteOn(high),
                Token::RangeLowStrict,
                Token::NoteOn(low),
            ],
            Control::LooseRange { low, high } => vec![
                Token::RangeHighLoose,
                Token::NoteOn(high),
                Token::RangeLowLoose,
                Token::NoteOn(low),
            ],
        }
    }

    /// Short name used in reports: the token spelling for binned controls
    /// and DNOC, `strict_range` / `loose_range` otherwise.
    pub fn label(&self) -> String {
        match self {
            Control::StrictRange { .. } | Control::LooseRange { .. } => self.family().name().to_string(),
            _ => self.to_tokens()[0].to_string(),
        }
    }

    /// Single-token controls (binned families and DNOC).
    pub fn from_token(token: Token) -> Option<Control> {
        use MeasurementKind::*;
        let binned = |kind, bin| Some(Control::Binned { kind, bin });
        match token {
            Token::Horiz(b) => binned(HorizontalDensity, b),
            Token::Interest(b) => binned(RhythmicInterest, b),
            Token::Vert(b) => binned(VerticalDensity, b),
            Token::Pcs(b) => binned(PitchClassesPerOnset, b),
            Token::Step(b) => binned(StepPropensity, b),
            Token::Leap(b) => binned(LeapPropensity, b),
            Token::Dnoc => Some(Control::Dnoc),
            _ => None,
        }
    }

    /// Compute a control of `family` from the notes it describes.
    /// DNOC needs the precomputed flag and yields `None` when it is false.
    pub fn compute(family: ControlFamily, span: &NoteSpan, dnoc_flag: bool) -> Result<Option<Control>, MeasureError> {
        Ok(match family {
            ControlFamily::Dnoc => dnoc_flag.then_some(Control::Dnoc),
            ControlFamily::StrictRange => {
                let PitchRange { low, high } = measure::pitch_range(span)?;
                Some(Control::StrictRange { low, high })
            }
            ControlFamily::LooseRange => {
                let PitchRange { low, high } = measure::pitch_range(span)?;
                Some(Control::LooseRange { low, high })
            }
            other => {
                let kind = other.measurement().expect("binned family");
                let m = measure::measure(kind, span)?;
                Some(Control::binned(kind, m.bin()))
            }
        })
    }
}

impl fmt::Display for Control {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::tokens::render_text(&self.to_tokens()))
    }
}

/// Parse a run of control tokens. Range markers must come as
/// high-marker, pitch, low-marker, pitch.
pub fn parse_controls(tokens: &[Token]) -> Result<Vec<Control>, ControlError> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let tok = tokens[i];
        if let Some(c) = Control::from_token(tok) {
            out.push(c);
            i += 1;
            continue;
        }
        let (strict, low_marker) = match tok {
            Token::RangeHighStrict => (true, Token::RangeLowStrict),
            Token::RangeHighLoose => (false, Token::RangeLowLoose),
            Token::RangeLowStrict | Token::RangeLowLoose => {
                return Err(ControlError::UnpairedRange {
                    offset: i,
                    token: tok.to_string(),
                })
            }
            _ => {
                return Err(ControlError::NotAControl {
                    offset: i,
                    token: tok.to_string(),
                })
            }
        };
        let pitch_at = |j: usize| match tokens.get(j) {
            Some(Token::NoteOn(p)) => Ok(*p),
            _ => Err(ControlError::MissingRangePitch { offset: j }),
        };
        let high = pitch_at(i + 1)?;
        if tokens.get(i + 2) != Some(&low_marker) {
            return Err(ControlError::UnpairedRange {
                offset: i,
                token: tok.to_string(),
            });
        }
        let low = pitch_at(i + 3)?;
        if low > high {
            return Err(ControlError::InvertedRange { low, high });
        }
        out.push(if strict {
            Control::StrictRange { low, high }
        } else {
            Control::LooseRange { low, high }
        });
        i += 4;
    }
    Ok(out)
}

/// At least one note at each extreme and none outside.
pub fn satisfies_strict_range(notes: &[Note], low: u8, high: u8) -> bool {
    !notes.is_empty()
        && notes.iter().all(|n| (low..=high).contains(&n.pitch))
        && notes.iter().any(|n| n.pitch == low)
        && notes.iter().any(|n| n.pitch == high)
}

/// At least one note within 7 semitones of each extreme and none outside.
pub fn satisfies_loose_range(notes: &[Note], low: u8, high: u8) -> bool {
    !notes.is_empty()
        && notes.iter().all(|n| (low..=high).contains(&n.pitch))
        && notes.iter().any(|n| n.pitch <= low.saturating_add(LOOSE_RANGE_SLACK))
        && notes.iter().any(|n| n.pitch >= high.saturating_sub(LOOSE_RANGE_SLACK))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokens::parse_text;

    fn notes(pitches: &[u8]) -> Vec<Note> {
        pitches.iter().enumerate().map(|(i, &p)| Note::new(p, i as u32 * 6, 6)).collect()
    }

    #[test]
    fn strict_range_predicate() {
        assert!(satisfies_strict_range(&notes(&[48, 60, 72]), 48, 72));
        assert!(!satisfies_strict_range(&notes(&[49, 60, 72]), 48, 72));
        assert!(!satisfies_strict_range(&notes(&[48, 73]), 48, 72));
        assert!(!satisfies_strict_range(&[], 48, 72));
    }

    #[test]
    fn loose_range_predicate() {
        assert!(satisfies_loose_range(&notes(&[55, 65]), 48, 72));
        assert!(!satisfies_loose_range(&notes(&[56, 65]), 48, 72));
        assert!(!satisfies_loose_range(&notes(&[55, 64]), 48, 72));
        assert!(!satisfies_loose_range(&notes(&[47, 65]), 48, 72));
        // strict implies loose
        assert!(satisfies_loose_range(&notes(&[48, 72]), 48, 72));
    }

    #[test]
    fn parse_control_runs() {
        let toks = parse_text("<horiz:2> <range_high_strict> <non:72> <range_low_strict> <non:48> <dnoc>").unwrap();
        let controls = parse_controls(&toks).unwrap();
        assert_eq!(
            controls,
            vec![
                Control::binned(MeasurementKind::HorizontalDensity, 2),
                Control::StrictRange { low: 48, high: 72 },
                Control::Dnoc
            ]
        );
        let back: Vec<Token> = controls.iter().flat_map(Control::to_tokens).collect();
        assert_eq!(back, toks);
    }

    #[test]
    fn parse_control_errors() {
        assert!(matches!(
            parse_controls(&parse_text("<pos:0>").unwrap()),
            Err(ControlError::NotAControl { offset: 0, .. })
        ));
        assert!(matches!(
            parse_controls(&parse_text("<range_high_loose> <non:60>").unwrap()),
            Err(ControlError::UnpairedRange { .. })
        ));
        assert!(matches!(
            parse_controls(&parse_text("<range_high_loose> <non:60> <range_low_loose> <non:70>").unwrap()),
            Err(ControlError::InvertedRange { .. })
        ));
    }
}
