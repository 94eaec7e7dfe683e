//! Token vocabulary, integer ids and the `<name:value>` text spelling.
//!
//! Ids are assigned family by family in the order of [`FAMILIES`]; within a
//! family, by payload in ascending order (2D masked-pitch tokens are ordered
//! by note count, then pitch-class count).

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::score::{DRUM_INSTRUMENT, MAX_DURATION_TICKS, MAX_MEASURE_TICKS};

pub const MAX_TRACKS: usize = 64;
pub const MAX_MASKS: usize = 256;
/// Cap for both counts carried by a 2D masked-pitch token.
pub const MAX_ONSET_COUNT: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    Instrument(u8),
    MeasureSep,
    MeasureLen(u16),
    Position(u16),
    NoteOn(u8),
    Duration(u16),
    Mask(u16),
    Fill(u16),
    EndOfTarget,
    Horiz(u8),
    Interest(u8),
    Vert(u8),
    Pcs(u8),
    Step(u8),
    Leap(u8),
    Dnoc,
    RangeHighStrict,
    RangeLowStrict,
    RangeHighLoose,
    RangeLowLoose,
    TrackRef(u8),
    MaskedPitch1d,
    MaskedPitch2d { notes: u8, pitch_classes: u8 },
}

/// One token family: spelling prefix and payload cardinality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Family {
    pub name: &'static str,
    pub size: u32,
}

const fn fam(name: &'static str, size: u32) -> Family {
    Family { name, size }
}

pub const FAMILIES: [Family; 23] = [
    fam("inst", DRUM_INSTRUMENT as u32 + 1),
    fam("sep", 1),
    fam("mlen", MAX_MEASURE_TICKS),
    fam("pos", MAX_MEASURE_TICKS),
    fam("non", 128),
    fam("dur", MAX_DURATION_TICKS),
    fam("mask", MAX_MASKS as u32),
    fam("fill", MAX_MASKS as u32),
    fam("eot", 1),
    fam("horiz", 6),
    fam("interest", 3),
    fam("vert", 5),
    fam("pcs", 5),
    fam("step", 7),
    fam("leap", 7),
    fam("dnoc", 1),
    fam("range_high_strict", 1),
    fam("range_low_strict", 1),
    fam("range_high_loose", 1),
    fam("range_low_loose", 1),
    fam("track", MAX_TRACKS as u32),
    fam("mp1", 1),
    fam("mp2", (MAX_ONSET_COUNT as u32) * (MAX_ONSET_COUNT as u32)),
];

const FAMILY_BASES: [u32; 23] = {
    let mut bases = [0u32; 23];
    let mut i = 1;
    while i < 23 {
        bases[i] = bases[i - 1] + FAMILIES[i - 1].size;
        i += 1;
    }
    bases
};

pub const VOCAB_SIZE: u32 = FAMILY_BASES[22] + FAMILIES[22].size;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TokenError {
    #[error("token {index}: unknown spelling `{spelling}`")]
    UnknownSpelling { index: usize, spelling: String },
    #[error("token {index}: `{spelling}` payload out of range")]
    OutOfRange { index: usize, spelling: String },
    #[error("token id {0} is outside the vocabulary")]
    BadId(u32),
}

impl Token {
    /// (family index, offset within family)
    fn family_offset(self) -> (usize, u32) {
        use Token::*;
        match self {
            Instrument(i) => (0, u32::from(i)),
            MeasureSep => (1, 0),
            MeasureLen(l) => (2, u32::from(l).wrapping_sub(1)),
            Position(p) => (3, u32::from(p)),
            NoteOn(p) => (4, u32::from(p)),
            Duration(d) => (5, u32::from(d).wrapping_sub(1)),
            Mask(k) => (6, u32::from(k)),
            Fill(k) => (7, u32::from(k)),
            EndOfTarget => (8, 0),
            Horiz(b) => (9, u32::from(b)),
            Interest(b) => (10, u32::from(b)),
            Vert(b) => (11, u32::from(b)),
            Pcs(b) => (12, u32::from(b)),
            Step(b) => (13, u32::from(b)),
            Leap(b) => (14, u32::from(b)),
            Dnoc => (15, 0),
            RangeHighStrict => (16, 0),
            RangeLowStrict => (17, 0),
            RangeHighLoose => (18, 0),
            RangeLowLoose => (19, 0),
            TrackRef(t) => (20, u32::from(t)),
            MaskedPitch1d => (21, 0),
            MaskedPitch2d { notes, pitch_classes } => (
                22,
                (u32::from(notes) - 1) * u32::from(MAX_ONSET_COUNT) + u32::from(pitch_classes) - 1,
            ),
        }
    }

    /// Payload within range for its family.
    pub fn is_valid(self) -> bool {
        use Token::*;
        let counts = 1..=MAX_ONSET_COUNT;
        match self {
            MeasureLen(0) | Duration(0) => false,
            MaskedPitch2d { notes, pitch_classes } => counts.contains(&notes) && counts.contains(&pitch_classes),
            _ => {
                let (family, offset) = self.family_offset();
                offset < FAMILIES[family].size
            }
        }
    }

    /// Integer id, or `None` when the payload is out of range.
    pub fn id(self) -> Option<u32> {
        self.is_valid().then(|| {
            let (family, offset) = self.family_offset();
            FAMILY_BASES[family] + offset
        })
    }

    pub fn from_id(id: u32) -> Result<Token, TokenError> {
        use Token::*;
        if id >= VOCAB_SIZE {
            return Err(TokenError::BadId(id));
        }
        let family = FAMILY_BASES.partition_point(|&b| b <= id) - 1;
        let off = id - FAMILY_BASES[family];
        Ok(match family {
            0 => Instrument(off as u8),
            1 => MeasureSep,
            2 => MeasureLen(off as u16 + 1),
            3 => Position(off as u16),
            4 => NoteOn(off as u8),
            5 => Duration(off as u16 + 1),
            6 => Mask(off as u16),
            7 => Fill(off as u16),
            8 => EndOfTarget,
            9 => Horiz(off as u8),
            10 => Interest(off as u8),
            11 => Vert(off as u8),
            12 => Pcs(off as u8),
            13 => Step(off as u8),
            14 => Leap(off as u8),
            15 => Dnoc,
            16 => RangeHighStrict,
            17 => RangeLowStrict,
            18 => RangeHighLoose,
            19 => RangeLowLoose,
            20 => TrackRef(off as u8),
            21 => MaskedPitch1d,
            _ => {
                let m = u32::from(MAX_ONSET_COUNT);
                MaskedPitch2d {
                    notes: (off / m + 1) as u8,
                    pitch_classes: (off % m + 1) as u8,
                }
            }
        })
    }

    pub fn family(self) -> &'static Family {
        &FAMILIES[self.family_offset().0]
    }

    /// Control-token families (bins, dnoc, range markers).
    pub fn is_control(self) -> bool {
        (9..=19).contains(&self.family_offset().0)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Token::*;
        let name = self.family().name;
        match *self {
            Instrument(v) | NoteOn(v) | Horiz(v) | Interest(v) | Vert(v) | Pcs(v) | Step(v) | Leap(v)
            | TrackRef(v) => write!(f, "<{name}:{v}>"),
            MeasureLen(v) | Position(v) | Duration(v) | Mask(v) | Fill(v) => write!(f, "<{name}:{v}>"),
            MaskedPitch2d { notes, pitch_classes } => write!(f, "<{name}:{notes}:{pitch_classes}>"),
            _ => write!(f, "<{name}>"),
        }
    }
}

fn parse_one(spelling: &str, index: usize) -> Result<Token, TokenError> {
    use Token::*;
    let unknown = || TokenError::UnknownSpelling {
        index,
        spelling: spelling.to_string(),
    };
    let range = || TokenError::OutOfRange {
        index,
        spelling: spelling.to_string(),
    };
    let inner = spelling
        .strip_prefix('<')
        .and_then(|s| s.strip_suffix('>'))
        .ok_or_else(unknown)?;
    let mut parts = inner.split(':');
    let name = parts.next().ok_or_else(unknown)?;
    let args: Vec<&str> = parts.collect();
    let num = |i: usize| -> Result<u32, TokenError> {
        let s = args.get(i).ok_or_else(unknown)?;
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(unknown());
        }
        s.parse::<u32>().map_err(|_| range())
    };
    let expect_args = |n: usize| if args.len() == n { Ok(()) } else { Err(unknown()) };
    let u8v = |i| num(i).and_then(|v| u8::try_from(v).map_err(|_| range()));
    let u16v = |i| num(i).and_then(|v| u16::try_from(v).map_err(|_| range()));

    let token = match name {
        "sep" | "eot" | "dnoc" | "range_high_strict" | "range_low_strict" | "range_high_loose"
        | "range_low_loose" | "mp1" => {
            expect_args(0)?;
            match name {
                "sep" => MeasureSep,
                "eot" => EndOfTarget,
                "dnoc" => Dnoc,
                "range_high_strict" => RangeHighStrict,
                "range_low_strict" => RangeLowStrict,
                "range_high_loose" => RangeHighLoose,
                "range_low_loose" => RangeLowLoose,
                _ => MaskedPitch1d,
            }
        }
        "mp2" => {
            expect_args(2)?;
            MaskedPitch2d {
                notes: u8v(0)?,
                pitch_classes: u8v(1)?,
            }
        }
        _ => {
            expect_args(1)?;
            match name {
                "inst" => Instrument(u8v(0)?),
                "mlen" => MeasureLen(u16v(0)?),
                "pos" => Position(u16v(0)?),
                "non" => NoteOn(u8v(0)?),
                "dur" => Duration(u16v(0)?),
                "mask" => Mask(u16v(0)?),
                "fill" => Fill(u16v(0)?),
                "horiz" => Horiz(u8v(0)?),
                "interest" => Interest(u8v(0)?),
                "vert" => Vert(u8v(0)?),
                "pcs" => Pcs(u8v(0)?),
                "step" => Step(u8v(0)?),
                "leap" => Leap(u8v(0)?),
                "track" => TrackRef(u8v(0)?),
                _ => return Err(unknown()),
            }
        }
    };
    if token.is_valid() {
        Ok(token)
    } else {
        Err(range())
    }
}

impl FromStr for Token {
    type Err = TokenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_one(s, 0)
    }
}

/// Space-separated spelling of a token sequence.
pub fn render_text(tokens: &[Token]) -> String {
    let mut out = String::with_capacity(tokens.len() * 8);
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&t.to_string());
    }
    out
}

pub fn parse_text(text: &str) -> Result<Vec<Token>, TokenError> {
    text.split_whitespace()
        .enumerate()
        .map(|(i, s)| parse_one(s, i))
        .collect()
}

/// Every token in id order.
pub fn vocabulary() -> Vec<Token> {
    (0..VOCAB_SIZE)
        .map(|id| Token::from_id(id).expect("id in range"))
        .collect()
}

/// SHA-256 over the id-ordered spellings, newline separated. Consumers pin
/// it to detect vocabulary drift.
pub fn vocabulary_fingerprint() -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for t in vocabulary() {
        h.update(t.to_string().as_bytes());
        h.update(b"\n");
    }
    format!("{:x}", h.finalize())
}

pub fn to_ids(tokens: &[Token]) -> Vec<u32> {
    tokens
        .iter()
        .map(|t| t.id().expect("encoder emits in-range tokens"))
        .collect()
}

pub fn from_ids(ids: &[u32]) -> Result<Vec<Token>, TokenError> {
    ids.iter().map(|&id| Token::from_id(id)).collect()
}
