//! Seeded procedural scores for desk-scale corpora and tests.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::CorpusFile;
use crate::midi::write_midi;
use crate::score::{
    MeasureSlice, Note, QuantizedScore, SliceTrack, Track, DRUM_INSTRUMENT, MAX_DURATION_TICKS,
    VALID_ONSET_OFFSETS,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub min_measures: usize,
    pub max_measures: usize,
    pub min_tracks: usize,
    pub max_tracks: usize,
    /// Chance that a section switches to 3/4.
    pub triple_meter: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            min_measures: 8,
            max_measures: 40,
            min_tracks: 1,
            max_tracks: 5,
            triple_meter: 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Melody,
    Chords,
    Bass,
    Drums,
    Sparse,
    Doubling,
}

const SCALE: [u8; 7] = [0, 2, 4, 5, 7, 9, 11];

fn grid_onsets(rng: &mut ChaCha8Rng, length: u32, density: f64) -> Vec<u32> {
    let mut out = Vec::new();
    for q in 0..length / 24 {
        for &off in &VALID_ONSET_OFFSETS {
            let p = match off {
                0 => density * 2.0,
                12 => density * 1.4,
                6 | 18 => density,
                _ => density * 0.25,
            };
            if rng.random_bool(p.min(1.0)) {
                out.push(q * 24 + off);
            }
        }
    }
    out
}

fn durations(onsets: &[u32], length: u32) -> Vec<u32> {
    onsets
        .iter()
        .enumerate()
        .map(|(i, &o)| onsets.get(i + 1).copied().unwrap_or(length) - o)
        .collect()
}

fn scale_pitch(root: u8, degree: i32) -> u8 {
    let octave = degree.div_euclid(7);
    let step = SCALE[degree.rem_euclid(7) as usize] as i32;
    (i32::from(root) + octave * 12 + step).clamp(0, 127) as u8
}

fn track_cells(rng: &mut ChaCha8Rng, role: Role, lengths: &[u32], root: u8) -> Vec<Vec<Note>> {
    let density: f64 = rng.random_range(0.08..0.45);
    let mut degree: i32 = rng.random_range(0..7);
    let mut cells = Vec::with_capacity(lengths.len());
    for &len in lengths {
        let mut notes = Vec::new();
        match role {
            Role::Melody => {
                let onsets = grid_onsets(rng, len, density);
                for (o, d) in onsets.iter().zip(durations(&onsets, len)) {
                    degree += match rng.random_range(0..10) {
                        0..=1 => 0,
                        2..=7 => *[-1, 1].choose(rng).unwrap(),
                        _ => rng.random_range(-4..=4),
                    };
                    degree = degree.clamp(-7, 14);
                    notes.push(Note::new(scale_pitch(root + 12, degree), *o, d));
                }
            }
            Role::Chords => {
                let onsets: Vec<u32> = (0..len / 24).filter(|_| rng.random_bool(0.6)).map(|q| q * 24).collect();
                for (o, d) in onsets.iter().zip(durations(&onsets, len)) {
                    degree = rng.random_range(0..7);
                    let size = rng.random_range(2..=4);
                    for k in 0..size {
                        notes.push(Note::new(scale_pitch(root, degree + 2 * k), *o, d));
                    }
                }
            }
            Role::Bass => {
                // frequently one repeated pitch per measure
                let pitch = scale_pitch(root - 24, rng.random_range(0..7));
                let pulse = *[24u32, 48, 12].choose(rng).unwrap();
                let mono = rng.random_bool(0.5);
                for o in (0..len).step_by(pulse as usize) {
                    let p = if mono { pitch } else { scale_pitch(root - 24, rng.random_range(0..7)) };
                    notes.push(Note::new(p, o, pulse.min(len - o)));
                }
            }
            Role::Drums => {
                for o in grid_onsets(rng, len, density.max(0.2)) {
                    let pitch = if o % 48 == 0 { 36 } else if o % 24 == 0 { 38 } else { 42 };
                    notes.push(Note::new(pitch, o, 6));
                }
            }
            Role::Sparse => {
                if rng.random_bool(0.55) {
                    let onsets = grid_onsets(rng, len, density * 0.5);
                    for (o, d) in onsets.iter().zip(durations(&onsets, len)) {
                        notes.push(Note::new(scale_pitch(root, rng.random_range(0..10)), *o, d));
                    }
                }
            }
            Role::Doubling => unreachable!("doubling copies another track"),
        }
        for n in &mut notes {
            n.duration = n.duration.clamp(1, MAX_DURATION_TICKS);
        }
        cells.push(notes);
    }
    cells
}

fn measure_lengths(rng: &mut ChaCha8Rng, n: usize, triple: f64) -> Vec<u32> {
    let mut lengths = Vec::with_capacity(n);
    let mut current = 96;
    while lengths.len() < n {
        if rng.random_bool(triple) {
            current = if current == 96 { 72 } else { 96 };
        }
        let block = rng.random_range(4..=8).min(n - lengths.len());
        lengths.extend(std::iter::repeat_n(current, block));
    }
    lengths
}

/// Random slice with plausible musical texture: melodic lines, chords,
/// repeated-pitch bass, drums, sparse parts and octave doublings.
pub fn synth_slice(rng: &mut ChaCha8Rng, num_measures: usize, config: &SynthConfig) -> MeasureSlice {
    let lengths = measure_lengths(rng, num_measures, config.triple_meter);
    let num_tracks = rng.random_range(config.min_tracks..=config.max_tracks);
    let root = rng.random_range(48..=60);
    let mut tracks: Vec<SliceTrack> = Vec::with_capacity(num_tracks);
    for i in 0..num_tracks {
        let role = match rng.random_range(0..12) {
            0..=3 => Role::Melody,
            4..=5 => Role::Chords,
            6..=7 => Role::Bass,
            8 => Role::Drums,
            9..=10 => Role::Sparse,
            _ => Role::Doubling,
        };
        let (instrument, cells) = if role == Role::Doubling && i > 0 {
            let src = &tracks[rng.random_range(0..i)];
            let shift: i16 = *[-12, 12].choose(rng).unwrap();
            let cells = src
                .cells
                .iter()
                .map(|c| {
                    c.iter()
                        .map(|n| Note { pitch: (i16::from(n.pitch) + shift).clamp(0, 127) as u8, ..*n })
                        .collect()
                })
                .collect();
            (rng.random_range(40..=47), cells)
        } else {
            let role = if role == Role::Doubling { Role::Melody } else { role };
            let instrument = match role {
                Role::Drums => DRUM_INSTRUMENT,
                Role::Bass => rng.random_range(32..=39),
                Role::Chords => rng.random_range(0..=7),
                _ => rng.random_range(0..=127),
            };
            (instrument, track_cells(rng, role, &lengths, root))
        };
        tracks.push(SliceTrack::new(instrument, cells));
    }
    MeasureSlice::new(lengths, tracks).expect("generated slices are well formed")
}

/// Fully random grid content, without musical structure. Useful for
/// property tests that need arbitrary polyphony and rhythm.
pub fn random_slice(rng: &mut ChaCha8Rng, max_tracks: usize, max_measures: usize) -> MeasureSlice {
    let num_measures = rng.random_range(1..=max_measures);
    let lengths: Vec<u32> = (0..num_measures)
        .map(|_| *[24u32, 48, 72, 96, 96, 96, 120, 192].choose(rng).unwrap())
        .collect();
    let num_tracks = rng.random_range(1..=max_tracks);
    let tracks = (0..num_tracks)
        .map(|_| {
            let instrument = rng.random_range(0..=128);
            let fill: f64 = rng.random_range(0.0..0.3);
            let cells = lengths
                .iter()
                .map(|&len| {
                    let mut notes = Vec::new();
                    if rng.random_bool(0.2) {
                        return notes;
                    }
                    for q in 0..len / 24 {
                        for &off in &VALID_ONSET_OFFSETS {
                            if rng.random_bool(fill) {
                                for _ in 0..rng.random_range(1..=3) {
                                    let pitch = rng.random_range(21..=108);
                                    let duration = rng.random_range(1..=96);
                                    notes.push(Note::new(pitch, q * 24 + off, duration));
                                }
                            }
                        }
                    }
                    notes
                })
                .collect();
            SliceTrack::new(instrument, cells)
        })
        .collect();
    MeasureSlice::new(lengths, tracks).expect("generated slices are well formed")
}

pub fn synth_score(seed: u64, config: &SynthConfig) -> QuantizedScore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(config.min_measures..=config.max_measures.max(config.min_measures));
    let slice = synth_slice(&mut rng, n, config);
    let mut score = slice.to_score();
    score.tracks.retain(|t| !t.notes.is_empty());
    if score.tracks.is_empty() {
        score.tracks.push(Track {
            instrument: 0,
            name: String::new(),
            is_drum: false,
            notes: vec![Note::new(60, 0, 24)],
        });
    }
    score
}

/// `count` generated scores written as SMF files, named `synth-NNNN.mid`.
pub fn synth_corpus(count: usize, seed: u64, config: &SynthConfig) -> Vec<CorpusFile> {
    (0..count)
        .map(|i| {
            let score = synth_score(seed.wrapping_mul(1_000_003).wrapping_add(i as u64), config);
            CorpusFile {
                source: format!("synth-{i:04}.mid"),
                bytes: write_midi(&score).expect("generated scores are writable"),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let c = SynthConfig::default();
        assert_eq!(synth_score(7, &c), synth_score(7, &c));
        assert_ne!(synth_score(7, &c), synth_score(8, &c));
    }

    #[test]
    fn notes_on_grid_and_in_bounds() {
        let c = SynthConfig::default();
        for seed in 0..50 {
            let s = synth_score(seed, &c);
            assert!(s.num_measures() >= c.min_measures);
            for t in &s.tracks {
                assert!(t.notes.iter().all(|n| crate::score::is_valid_onset(n.onset) && n.onset < s.measure_map.end()));
            }
        }
    }

    #[test]
    fn corpus_round_trips_through_midi() {
        let c = SynthConfig::default();
        for f in synth_corpus(5, 1, &c) {
            let score = crate::midi::load_midi(&f.bytes).unwrap();
            assert!(score.note_count() > 0);
        }
    }

    #[test]
    fn random_slices_well_formed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let s = random_slice(&mut rng, 4, 8);
            assert!(s.num_tracks() >= 1 && s.num_measures() >= 1);
        }
    }
}
