//! Mapping between measure slices and (prompt, target) token sequences.
//!
//! Prompt layout, per track:
//!
//! ```text
//! <inst:i> <mlen:L> cell <sep> <mlen:L> cell ...
//! ```
//!
//! where an unmasked cell is its note tokens (`<pos>` once per onset tick,
//! then `<non> <dur>` per note in descending pitch) and a masked cell is
//! `<mask:k>`, its track-measure controls, and optional rhythmic
//! conditioning (`<pos> <mp1|mp2> <dur>` per onset tick). Track-level
//! control blocks (`<track:i>` + controls) follow the last track.
//!
//! The target is `<fill:k>` + note tokens for each masked cell in ascending
//! `k`, closed by `<eot>`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controls::{parse_controls, Control, ControlError, ControlFamily};
use crate::measure::{self, MeasureError, RhythmEntry, RhythmMode};
use crate::score::{is_valid_onset, MeasureSlice, Note, ScoreError, SliceTrack, MAX_MEASURE_TICKS};
use crate::tokens::{Token, MAX_MASKS, MAX_ONSET_COUNT, MAX_TRACKS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Conditioning {
    #[default]
    None,
    #[serde(rename = "1d")]
    OneD,
    #[serde(rename = "2d")]
    TwoD,
}

impl Conditioning {
    fn mode(self) -> Option<RhythmMode> {
        match self {
            Conditioning::None => None,
            Conditioning::OneD => Some(RhythmMode::OneD),
            Conditioning::TwoD => Some(RhythmMode::TwoD),
        }
    }
}

/// Masked track-measures with their conditioning mode. Mask indices follow
/// row-major (track, then measure) order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MaskSpec {
    cells: BTreeMap<(usize, usize), Conditioning>,
}

impl MaskSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_cells<I: IntoIterator<Item = (usize, usize)>>(cells: I) -> Self {
        MaskSpec {
            cells: cells.into_iter().map(|c| (c, Conditioning::None)).collect(),
        }
    }

    pub fn insert(&mut self, track: usize, measure: usize, conditioning: Conditioning) {
        self.cells.insert((track, measure), conditioning);
    }

    pub fn remove(&mut self, track: usize, measure: usize) -> Option<Conditioning> {
        self.cells.remove(&(track, measure))
    }

    pub fn contains(&self, track: usize, measure: usize) -> bool {
        self.cells.contains_key(&(track, measure))
    }

    pub fn conditioning(&self, track: usize, measure: usize) -> Option<Conditioning> {
        self.cells.get(&(track, measure)).copied()
    }

    pub fn set_conditioning(&mut self, track: usize, measure: usize, conditioning: Conditioning) {
        if let Some(c) = self.cells.get_mut(&(track, measure)) {
            *c = conditioning;
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Masked cells in mask-index order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cells.keys().copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), Conditioning)> + '_ {
        self.cells.iter().map(|(&c, &m)| (c, m))
    }

    pub fn index_of(&self, track: usize, measure: usize) -> Option<usize> {
        self.cells.keys().position(|&c| c == (track, measure))
    }

    pub fn masked_measures(&self, track: usize) -> Vec<usize> {
        self.cells
            .range((track, 0)..(track + 1, 0))
            .map(|(&(_, m), _)| m)
            .collect()
    }
}

/// Which control families to emit, per track and per track-measure.
/// Values are computed from the masked notes by [`encode`].
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ControlSpec {
    pub track: BTreeMap<usize, BTreeSet<ControlFamily>>,
    pub cell: BTreeMap<(usize, usize), BTreeSet<ControlFamily>>,
}

impl ControlSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_track(&mut self, track: usize, family: ControlFamily) {
        self.track.entry(track).or_default().insert(family);
    }

    pub fn add_cell(&mut self, track: usize, measure: usize, family: ControlFamily) {
        self.cell.entry((track, measure)).or_default().insert(family);
    }

    pub fn is_empty(&self) -> bool {
        self.track.values().all(BTreeSet::is_empty) && self.cell.values().all(BTreeSet::is_empty)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceGeometry {
    pub num_tracks: usize,
    pub measure_lengths: Vec<u32>,
}

impl SliceGeometry {
    pub fn of(slice: &MeasureSlice) -> Self {
        SliceGeometry {
            num_tracks: slice.num_tracks(),
            measure_lengths: slice.measure_lengths().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTargetPair {
    pub prompt: Vec<Token>,
    pub target: Vec<Token>,
    /// Notes such as clamped 2D conditioning counts.
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error(transparent)]
    Cell(#[from] ScoreError),
    #[error("{0} tracks exceed the {MAX_TRACKS}-track limit")]
    TooManyTracks(usize),
    #[error("{0} masked track-measures exceed the {MAX_MASKS}-mask limit")]
    TooManyMasks(usize),
    #[error("control `{family}` is not available {scope}")]
    NotAllowed { family: ControlFamily, scope: String },
    #[error("control `{family}` {scope} has no masked content to describe")]
    NotMasked { family: ControlFamily, scope: String },
    #[error("control `{family}` {scope}: {source}")]
    Undefined {
        family: ControlFamily,
        scope: String,
        source: MeasureError,
    },
}

fn push_cell_notes(out: &mut Vec<Token>, notes: &[Note]) {
    let mut sorted: Vec<&Note> = notes.iter().collect();
    sorted.sort_by(|a, b| a.onset.cmp(&b.onset).then(b.pitch.cmp(&a.pitch)));
    let mut last = None;
    for n in sorted {
        if last != Some(n.onset) {
            out.push(Token::Position(n.onset as u16));
            last = Some(n.onset);
        }
        out.push(Token::NoteOn(n.pitch));
        out.push(Token::Duration(n.duration as u16));
    }
}

/// Note tokens for one track-measure, as they appear in prompts and targets.
pub fn cell_tokens(notes: &[Note]) -> Vec<Token> {
    let mut out = Vec::new();
    push_cell_notes(&mut out, notes);
    out
}

/// Every control family that is defined for the masked content: all
/// track-level families over each track's masked measures and all
/// track-measure families per masked cell (DNOC only where it holds).
pub fn defined_controls(slice: &MeasureSlice, masks: &MaskSpec) -> ControlSpec {
    let dnoc = measure::dnoc_flags(slice);
    let mut spec = ControlSpec::new();
    let mut tracks = BTreeSet::new();
    for (t, m) in masks.cells() {
        tracks.insert(t);
        let span = slice.span(t, [m]);
        for family in ControlFamily::CELL_LEVEL {
            if let Ok(Some(_)) = Control::compute(family, &span, dnoc[t][m]) {
                spec.add_cell(t, m, family);
            }
        }
    }
    for t in tracks {
        let span = slice.span(t, masks.masked_measures(t));
        for family in ControlFamily::TRACK_LEVEL {
            if let Ok(Some(_)) = Control::compute(family, &span, false) {
                spec.add_track(t, family);
            }
        }
    }
    spec
}

pub fn encode(slice: &MeasureSlice, masks: &MaskSpec, controls: &ControlSpec) -> Result<PromptTargetPair, EncodeError> {
    if slice.num_tracks() > MAX_TRACKS {
        return Err(EncodeError::TooManyTracks(slice.num_tracks()));
    }
    if masks.len() > MAX_MASKS {
        return Err(EncodeError::TooManyMasks(masks.len()));
    }
    for (t, m) in masks.cells() {
        slice.check_cell(t, m)?;
    }
    for (&t, families) in &controls.track {
        slice.check_cell(t, 0)?;
        for &family in families {
            let scope = format!("on track {t}");
            if !family.allowed_per_track() {
                return Err(EncodeError::NotAllowed { family, scope });
            }
            if masks.masked_measures(t).is_empty() {
                return Err(EncodeError::NotMasked { family, scope });
            }
        }
    }
    for (&(t, m), families) in &controls.cell {
        slice.check_cell(t, m)?;
        for &family in families {
            let scope = format!("on track-measure ({t}, {m})");
            if !family.allowed_per_cell() {
                return Err(EncodeError::NotAllowed { family, scope });
            }
            if !masks.contains(t, m) {
                return Err(EncodeError::NotMasked { family, scope });
            }
        }
    }

    let needs_dnoc = controls.cell.values().any(|f| f.contains(&ControlFamily::Dnoc));
    let dnoc = needs_dnoc.then(|| measure::dnoc_flags(slice));
    let mut diagnostics = Vec::new();
    let mut prompt = Vec::new();

    let mut mask_index = 0u16;
    for t in 0..slice.num_tracks() {
        prompt.push(Token::Instrument(slice.track(t).instrument));
        for (m, &len) in slice.measure_lengths().iter().enumerate() {
            if m > 0 {
                prompt.push(Token::MeasureSep);
            }
            prompt.push(Token::MeasureLen(len as u16));
            let Some(conditioning) = masks.conditioning(t, m) else {
                push_cell_notes(&mut prompt, slice.cell(t, m));
                continue;
            };
            prompt.push(Token::Mask(mask_index));
            mask_index += 1;

            if let Some(families) = controls.cell.get(&(t, m)) {
                let span = slice.span(t, [m]);
                let flag = dnoc.as_ref().is_some_and(|f| f[t][m]);
                for &family in families {
                    let control = Control::compute(family, &span, flag).map_err(|source| EncodeError::Undefined {
                        family,
                        scope: format!("on track-measure ({t}, {m})"),
                        source,
                    })?;
                    if let Some(c) = control {
                        prompt.extend(c.to_tokens());
                    }
                }
            }

            if let Some(mode) = conditioning.mode() {
                let info = measure::rhythm_info(&slice.span(t, [m]), mode);
                for entry in &info.entries {
                    prompt.push(Token::Position(entry.onset as u16));
                    prompt.push(match entry.counts {
                        None => Token::MaskedPitch1d,
                        Some(c) => {
                            let cap = u32::from(MAX_ONSET_COUNT);
                            if c.notes > cap || c.pitch_classes > cap {
                                diagnostics.push(format!(
                                    "track-measure ({t}, {m}) tick {}: clamped 2D counts ({}, {}) to {cap}",
                                    entry.onset, c.notes, c.pitch_classes
                                ));
                            }
                            Token::MaskedPitch2d {
                                notes: c.notes.min(cap) as u8,
                                pitch_classes: c.pitch_classes.min(cap) as u8,
                            }
                        }
                    });
                    prompt.push(Token::Duration(entry.duration as u16));
                }
            }
        }
    }

    for (&t, families) in &controls.track {
        if families.is_empty() {
            continue;
        }
        prompt.push(Token::TrackRef(t as u8));
        let span = slice.span(t, masks.masked_measures(t));
        for &family in families {
            let control = Control::compute(family, &span, false).map_err(|source| EncodeError::Undefined {
                family,
                scope: format!("on track {t}"),
                source,
            })?;
            if let Some(c) = control {
                prompt.extend(c.to_tokens());
            }
        }
    }

    let mut target = Vec::new();
    for (k, (t, m)) in masks.cells().enumerate() {
        target.push(Token::Fill(k as u16));
        push_cell_notes(&mut target, slice.cell(t, m));
    }
    target.push(Token::EndOfTarget);

    Ok(PromptTargetPair {
        prompt,
        target,
        diagnostics,
    })
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("token {offset}: unexpected `{found}`, expected {expected}")]
    Grammar {
        offset: usize,
        found: String,
        expected: &'static str,
    },
    #[error("token {offset}: position {position} is outside a {length}-tick measure")]
    PositionOutOfMeasure { offset: usize, position: u16, length: u32 },
    #[error("token {offset}: position {position} is not a valid onset or does not advance")]
    BadPosition { offset: usize, position: u16 },
    #[error("token {offset}: fill index {index} does not name a remaining masked track-measure")]
    BadFill { offset: usize, index: u16 },
    #[error("prompt geometry: {0}")]
    Geometry(String),
    #[error("token {offset}: {source}")]
    Control { offset: usize, source: ControlError },
}

impl DecodeError {
    pub fn offset(&self) -> Option<usize> {
        match self {
            DecodeError::Grammar { offset, .. }
            | DecodeError::PositionOutOfMeasure { offset, .. }
            | DecodeError::BadPosition { offset, .. }
            | DecodeError::BadFill { offset, .. }
            | DecodeError::Control { offset, .. } => Some(*offset),
            DecodeError::Geometry(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodedCell {
    pub track: usize,
    pub measure: usize,
    /// Onsets relative to the measure start.
    pub notes: Vec<Note>,
}

/// Decoder output: one entry per masked track-measure, in mask order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub cells: Vec<DecodedCell>,
    /// `<eot>` was reached.
    pub complete: bool,
    /// Set by [`decode_salvage`] when the target broke the grammar.
    pub error: Option<DecodeError>,
}

impl Decoded {
    pub fn notes(&self, track: usize, measure: usize) -> Option<&[Note]> {
        self.cells
            .iter()
            .find(|c| c.track == track && c.measure == measure)
            .map(|c| c.notes.as_slice())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Expect {
    FillOrEnd,
    PositionFillOrEnd,
    NoteOn,
    Duration,
    NoteOnPositionFillOrEnd,
}

/// Decode with the grammar enforced. A target that stops before `<eot>`
/// still decodes: every fill block closed by a later `<fill>` is kept and
/// `complete` is false.
pub fn decode(target: &[Token], masks: &MaskSpec, geometry: &SliceGeometry) -> Result<Decoded, DecodeError> {
    let out = decode_salvage(target, masks, geometry);
    match out.error {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Decode keeping every fill block completed before the first grammar
/// error (or before the end of a truncated target).
pub fn decode_salvage(target: &[Token], masks: &MaskSpec, geometry: &SliceGeometry) -> Decoded {
    let cells: Vec<(usize, usize)> = masks.cells().collect();
    let mut decoded: Vec<DecodedCell> = cells
        .iter()
        .map(|&(track, measure)| DecodedCell {
            track,
            measure,
            notes: Vec::new(),
        })
        .collect();

    let mut state = Expect::FillOrEnd;
    let mut current: Option<usize> = None;
    let mut block: Vec<Note> = Vec::new();
    let mut position: Option<u16> = None;
    let mut pitch = 0u8;
    let mut next_fill = 0usize;
    let mut complete = false;
    let mut error = None;

    let commit = |decoded: &mut Vec<DecodedCell>, current: Option<usize>, block: &mut Vec<Note>| {
        if let Some(k) = current {
            crate::score::normalize_notes(block);
            decoded[k].notes = std::mem::take(block);
        }
    };

    for (offset, &tok) in target.iter().enumerate() {
        let grammar = |expected| DecodeError::Grammar {
            offset,
            found: tok.to_string(),
            expected,
        };
        let at_boundary = matches!(
            state,
            Expect::FillOrEnd | Expect::PositionFillOrEnd | Expect::NoteOnPositionFillOrEnd
        );
        match tok {
            Token::EndOfTarget if at_boundary => {
                commit(&mut decoded, current, &mut block);
                complete = true;
                break;
            }
            Token::Fill(k) if at_boundary => {
                let k = usize::from(k);
                if k < next_fill || k >= cells.len() {
                    error = Some(DecodeError::BadFill {
                        offset,
                        index: k as u16,
                    });
                    break;
                }
                commit(&mut decoded, current, &mut block);
                current = Some(k);
                next_fill = k + 1;
                position = None;
                state = Expect::PositionFillOrEnd;
            }
            Token::Position(p) if matches!(state, Expect::PositionFillOrEnd | Expect::NoteOnPositionFillOrEnd) => {
                let (_, m) = cells[current.expect("inside a block")];
                let length = geometry.measure_lengths[m];
                if u32::from(p) >= length {
                    error = Some(DecodeError::PositionOutOfMeasure {
                        offset,
                        position: p,
                        length,
                    });
                    break;
                }
                if !is_valid_onset(u32::from(p)) || position.is_some_and(|prev| p <= prev) {
                    error = Some(DecodeError::BadPosition { offset, position: p });
                    break;
                }
                position = Some(p);
                state = Expect::NoteOn;
            }
            Token::NoteOn(n) if matches!(state, Expect::NoteOn | Expect::NoteOnPositionFillOrEnd) => {
                pitch = n;
                state = Expect::Duration;
            }
            Token::Duration(d) if state == Expect::Duration => {
                block.push(Note {
                    pitch,
                    onset: u32::from(position.expect("position precedes notes")),
                    duration: u32::from(d),
                });
                state = Expect::NoteOnPositionFillOrEnd;
            }
            _ => {
                error = Some(grammar(match state {
                    Expect::FillOrEnd => "<fill> or <eot>",
                    Expect::PositionFillOrEnd => "<pos>, <fill> or <eot>",
                    Expect::NoteOn => "<non>",
                    Expect::Duration => "<dur>",
                    Expect::NoteOnPositionFillOrEnd => "<non>, <pos>, <fill> or <eot>",
                }));
                break;
            }
        }
    }

    Decoded {
        cells: decoded,
        complete,
        error,
    }
}

/// Everything recoverable from a prompt: the slice with masked cells left
/// empty, the masks, declared controls and rhythmic conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptLayout {
    pub slice: MeasureSlice,
    pub masks: MaskSpec,
    pub track_controls: BTreeMap<usize, Vec<Control>>,
    pub cell_controls: BTreeMap<(usize, usize), Vec<Control>>,
    pub conditioning: BTreeMap<(usize, usize), Vec<RhythmEntry>>,
}

impl PromptLayout {
    pub fn geometry(&self) -> SliceGeometry {
        SliceGeometry::of(&self.slice)
    }

    /// The slice with decoded notes written into the masked cells.
    pub fn fill(&self, decoded: &Decoded) -> MeasureSlice {
        let mut slice = self.slice.clone();
        for cell in &decoded.cells {
            let notes = slice.cell_mut(cell.track, cell.measure);
            notes.extend(cell.notes.iter().copied());
            crate::score::normalize_notes(notes);
        }
        slice
    }
}

struct Cursor<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<Token> {
        self.tokens.get(self.pos).copied()
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.peek();
        self.pos += 1;
        t
    }

    fn error(&self, expected: &'static str) -> DecodeError {
        DecodeError::Grammar {
            offset: self.pos,
            found: self.peek().map_or_else(|| "end of prompt".to_string(), |t| t.to_string()),
            expected,
        }
    }

    fn controls(&mut self) -> Result<Vec<Control>, DecodeError> {
        let start = self.pos;
        while let Some(t) = self.peek() {
            if t.is_control() || (matches!(t, Token::NoteOn(_)) && self.pos > start) {
                self.pos += 1;
            } else {
                break;
            }
        }
        parse_controls(&self.tokens[start..self.pos]).map_err(|source| DecodeError::Control { offset: start, source })
    }
}

/// Recover slice geometry, unmasked notes, masks and controls from a prompt.
pub fn parse_prompt(prompt: &[Token]) -> Result<PromptLayout, DecodeError> {
    let mut cur = Cursor { tokens: prompt, pos: 0 };
    let mut lengths: Option<Vec<u32>> = None;
    let mut tracks = Vec::new();
    let mut masks = MaskSpec::new();
    let mut cell_controls = BTreeMap::new();
    let mut conditioning = BTreeMap::new();

    while let Some(Token::Instrument(instrument)) = cur.peek() {
        cur.next();
        let t = tracks.len();
        let mut cells = Vec::new();
        let mut track_lengths = Vec::new();
        loop {
            if !track_lengths.is_empty() {
                if cur.peek() != Some(Token::MeasureSep) {
                    break;
                }
                cur.next();
            }
            let len = match cur.next() {
                Some(Token::MeasureLen(l)) if u32::from(l) <= MAX_MEASURE_TICKS => u32::from(l),
                _ => {
                    cur.pos -= 1;
                    return Err(cur.error("<mlen>"));
                }
            };
            let m = track_lengths.len();
            track_lengths.push(len);

            let mut notes = Vec::new();
            if let Some(Token::Mask(k)) = cur.peek() {
                if usize::from(k) != masks.len() {
                    return Err(DecodeError::BadFill { offset: cur.pos, index: k });
                }
                cur.next();
                let controls = cur.controls()?;
                if !controls.is_empty() {
                    cell_controls.insert((t, m), controls);
                }
                let mut entries = Vec::new();
                let mut mode = Conditioning::None;
                while let Some(Token::Position(p)) = cur.peek() {
                    let at = cur.pos;
                    cur.next();
                    let counts = match cur.next() {
                        Some(Token::MaskedPitch1d) if mode != Conditioning::TwoD => {
                            mode = Conditioning::OneD;
                            None
                        }
                        Some(Token::MaskedPitch2d { notes, pitch_classes }) if mode != Conditioning::OneD => {
                            mode = Conditioning::TwoD;
                            Some(measure::OnsetCounts {
                                notes: u32::from(notes),
                                pitch_classes: u32::from(pitch_classes),
                            })
                        }
                        _ => {
                            cur.pos -= 1;
                            return Err(cur.error("<mp1> or <mp2>"));
                        }
                    };
                    let duration = match cur.next() {
                        Some(Token::Duration(d)) => u32::from(d),
                        _ => {
                            cur.pos -= 1;
                            return Err(cur.error("<dur>"));
                        }
                    };
                    if u32::from(p) >= len || entries.last().is_some_and(|e: &RhythmEntry| e.onset >= u32::from(p)) {
                        return Err(DecodeError::BadPosition { offset: at, position: p });
                    }
                    entries.push(RhythmEntry {
                        onset: u32::from(p),
                        duration,
                        counts,
                    });
                }
                masks.insert(t, m, mode);
                if !entries.is_empty() {
                    conditioning.insert((t, m), entries);
                }
            } else {
                let mut position = None;
                while let Some(Token::Position(p)) = cur.peek() {
                    if u32::from(p) >= len || !is_valid_onset(u32::from(p)) || position.is_some_and(|q| p <= q) {
                        return Err(DecodeError::BadPosition { offset: cur.pos, position: p });
                    }
                    position = Some(p);
                    cur.next();
                    let mut any = false;
                    while let Some(Token::NoteOn(pitch)) = cur.peek() {
                        cur.next();
                        match cur.next() {
                            Some(Token::Duration(d)) => notes.push(Note::new(pitch, u32::from(p), u32::from(d))),
                            _ => {
                                cur.pos -= 1;
                                return Err(cur.error("<dur>"));
                            }
                        }
                        any = true;
                    }
                    if !any {
                        return Err(cur.error("<non>"));
                    }
                }
            }
            cells.push(notes);
        }
        match &lengths {
            None => lengths = Some(track_lengths),
            Some(l) if *l == track_lengths => {}
            Some(_) => {
                return Err(DecodeError::Geometry(format!(
                    "track {t} measure lengths differ from track 0"
                )))
            }
        }
        tracks.push(SliceTrack::new(instrument, cells));
    }

    let mut track_controls = BTreeMap::new();
    while let Some(Token::TrackRef(t)) = cur.peek() {
        cur.next();
        let t = usize::from(t);
        if t >= tracks.len() {
            return Err(DecodeError::Geometry(format!("control block for missing track {t}")));
        }
        track_controls.insert(t, cur.controls()?);
    }
    if cur.peek().is_some() {
        return Err(cur.error("<inst>, <track> or end of prompt"));
    }

    let lengths = lengths.unwrap_or_default();
    let slice = MeasureSlice::new(lengths, tracks).map_err(|e| DecodeError::Geometry(e.to_string()))?;
    Ok(PromptLayout {
        slice,
        masks,
        track_controls,
        cell_controls,
        conditioning,
    })
}
