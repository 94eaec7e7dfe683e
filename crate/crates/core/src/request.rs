//! File-level requests shared by the command line and the Python bindings:
//! tokenizing a score under a JSON mask specification and turning token text
//! back into a score.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controls::ControlFamily;
use crate::language::{decode, encode, parse_prompt, Conditioning, ControlSpec, DecodeError, Decoded, EncodeError, MaskSpec};
use crate::score::{MeasureSlice, QuantizedScore, ScoreError};
use crate::tokens::{parse_text, render_text, to_ids, TokenError};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskFile {
    #[serde(default)]
    pub start_measure: usize,
    /// Defaults to every measure after `start_measure`.
    #[serde(default)]
    pub num_measures: Option<usize>,
    #[serde(default)]
    pub masks: Vec<MaskEntry>,
    #[serde(default)]
    pub track_controls: Vec<TrackControls>,
    #[serde(default)]
    pub cell_controls: Vec<CellControls>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskEntry {
    pub track: usize,
    pub measure: usize,
    #[serde(default)]
    pub conditioning: Conditioning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackControls {
    pub track: usize,
    pub controls: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellControls {
    pub track: usize,
    pub measure: usize,
    pub controls: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tokenized {
    pub prompt_text: String,
    pub target_text: String,
    pub prompt_ids: Vec<u32>,
    pub target_ids: Vec<u32>,
    pub num_tracks: usize,
    pub measure_lengths: Vec<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Error)]
pub enum RequestError {
    #[error("unknown control family `{0}`")]
    UnknownFamily(String),
    #[error(transparent)]
    Slice(#[from] ScoreError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("{sequence}: {source}")]
    Tokens {
        sequence: &'static str,
        source: TokenError,
    },
    #[error("{sequence}: {source}")]
    Grammar {
        sequence: &'static str,
        source: DecodeError,
    },
}

impl RequestError {
    /// Token offset of a grammar or spelling failure.
    pub fn offset(&self) -> Option<usize> {
        match self {
            RequestError::Tokens { source, .. } => match source {
                TokenError::UnknownSpelling { index, .. } | TokenError::OutOfRange { index, .. } => Some(*index),
                TokenError::BadId(_) => None,
            },
            RequestError::Grammar { source, .. } => source.offset(),
            _ => None,
        }
    }

    pub fn sequence(&self) -> Option<&'static str> {
        match self {
            RequestError::Tokens { sequence, .. } | RequestError::Grammar { sequence, .. } => Some(sequence),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RequestError::UnknownFamily(_) => "mask_spec",
            RequestError::Slice(_) => "slice",
            RequestError::Encode(_) => "encode",
            RequestError::Tokens { .. } | RequestError::Grammar { .. } => "grammar",
        }
    }
}

fn family(name: &str) -> Result<ControlFamily, RequestError> {
    ControlFamily::from_name(name).ok_or_else(|| RequestError::UnknownFamily(name.to_string()))
}

impl MaskFile {
    pub fn specs(&self) -> Result<(MaskSpec, ControlSpec), RequestError> {
        let mut masks = MaskSpec::new();
        for m in &self.masks {
            masks.insert(m.track, m.measure, m.conditioning);
        }
        let mut controls = ControlSpec::new();
        for t in &self.track_controls {
            for c in &t.controls {
                controls.add_track(t.track, family(c)?);
            }
        }
        for cell in &self.cell_controls {
            for c in &cell.controls {
                controls.add_cell(cell.track, cell.measure, family(c)?);
            }
        }
        Ok((masks, controls))
    }

    pub fn slice(&self, score: &QuantizedScore) -> Result<MeasureSlice, ScoreError> {
        let n = self
            .num_measures
            .unwrap_or_else(|| score.num_measures().saturating_sub(self.start_measure));
        score.slice(self.start_measure, n)
    }
}

/// Encode the slice and masks a [`MaskFile`] describes.
pub fn tokenize(score: &QuantizedScore, request: &MaskFile) -> Result<Tokenized, RequestError> {
    let slice = request.slice(score)?;
    let (masks, controls) = request.specs()?;
    let pair = encode(&slice, &masks, &controls)?;
    Ok(Tokenized {
        prompt_text: render_text(&pair.prompt),
        target_text: render_text(&pair.target),
        prompt_ids: to_ids(&pair.prompt),
        target_ids: to_ids(&pair.target),
        num_tracks: slice.num_tracks(),
        measure_lengths: slice.measure_lengths().to_vec(),
        diagnostics: pair.diagnostics,
    })
}

/// Strictly decode a target against its prompt and rebuild the whole slice.
pub fn detokenize(prompt_text: &str, target_text: &str) -> Result<(QuantizedScore, Decoded), RequestError> {
    let prompt = parse_text(prompt_text).map_err(|source| RequestError::Tokens {
        sequence: "prompt",
        source,
    })?;
    let target = parse_text(target_text).map_err(|source| RequestError::Tokens {
        sequence: "target",
        source,
    })?;
    let layout = parse_prompt(&prompt).map_err(|source| RequestError::Grammar {
        sequence: "prompt",
        source,
    })?;
    let decoded = decode(&target, &layout.masks, &layout.geometry()).map_err(|source| RequestError::Grammar {
        sequence: "target",
        source,
    })?;
    Ok((layout.fill(&decoded).to_score(), decoded))
}
