//! Training examples and infilling test sets built from quantized scores.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::controls::ControlFamily;
use crate::language::{self, defined_controls, Conditioning, ControlSpec, DecodeError, EncodeError, MaskSpec, PromptLayout};
use crate::midi::load_midi;
use crate::score::{normalize_notes, MeasureSlice, Note, QuantizedScore};
use crate::tokens::{from_ids, render_text, to_ids, Token, TokenError};

/// Measures per test-set slice.
pub const TEST_SLICE_MEASURES: usize = 8;
/// Track infilling needs onsets in at least this many of the slice's measures.
pub const TRACK_INFILL_MIN_MEASURES: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Random,
    Track,
    LastBar,
    Train,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Random, Task::Track, Task::LastBar, Task::Train];

    pub fn name(self) -> &'static str {
        match self {
            Task::Random => "random",
            Task::Track => "track",
            Task::LastBar => "last-bar",
            Task::Train => "train",
        }
    }

    pub fn from_name(name: &str) -> Option<Task> {
        match name {
            "lastbar" => Some(Task::LastBar),
            _ => Task::ALL.into_iter().find(|t| t.name() == name),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceCoords {
    pub start_measure: usize,
    pub num_measures: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfillExample {
    pub id: String,
    pub task: Task,
    pub source: String,
    pub slice: SliceCoords,
    pub seed: u64,
    pub prompt_ids: Vec<u32>,
    pub target_ids: Vec<u32>,
    pub prompt_text: String,
    /// `[track, measure, pitch, onset, duration]`, onset relative to the measure.
    pub ground_truth: Vec<[u32; 5]>,
    /// `[track, measure]` cells unmasked by the max-controls protocol and
    /// credited to the model as if generated.
    #[serde(default)]
    pub auto_credited: Vec<[u32; 2]>,
}

#[derive(Debug, Error)]
pub enum ExampleError {
    #[error("example `{id}`: {source}")]
    Tokens { id: String, source: TokenError },
    #[error("example `{id}`: prompt: {source}")]
    Prompt { id: String, source: DecodeError },
    #[error("example `{id}`: {source}")]
    Encode { id: String, source: EncodeError },
}

impl InfillExample {
    pub fn prompt(&self) -> Result<Vec<Token>, ExampleError> {
        from_ids(&self.prompt_ids).map_err(|source| ExampleError::Tokens { id: self.id.clone(), source })
    }

    pub fn target(&self) -> Result<Vec<Token>, ExampleError> {
        from_ids(&self.target_ids).map_err(|source| ExampleError::Tokens { id: self.id.clone(), source })
    }

    pub fn layout(&self) -> Result<PromptLayout, ExampleError> {
        language::parse_prompt(&self.prompt()?).map_err(|source| ExampleError::Prompt { id: self.id.clone(), source })
    }

    pub fn truth_cells(&self) -> BTreeMap<(usize, usize), Vec<Note>> {
        let mut cells: BTreeMap<(usize, usize), Vec<Note>> = BTreeMap::new();
        for &[t, m, pitch, onset, duration] in &self.ground_truth {
            cells
                .entry((t as usize, m as usize))
                .or_default()
                .push(Note::new(pitch as u8, onset, duration));
        }
        for notes in cells.values_mut() {
            normalize_notes(notes);
        }
        cells
    }

    pub fn auto_credited_cells(&self) -> BTreeSet<(usize, usize)> {
        self.auto_credited.iter().map(|&[t, m]| (t as usize, m as usize)).collect()
    }

    /// The full slice: prompt context with the ground truth written back.
    pub fn full_slice(&self) -> Result<MeasureSlice, ExampleError> {
        let layout = self.layout()?;
        let mut slice = layout.slice;
        for ((t, m), notes) in self.truth_cells() {
            if !layout.masks.contains(t, m) {
                continue;
            }
            let cell = slice.cell_mut(t, m);
            cell.extend(notes);
            normalize_notes(cell);
        }
        Ok(slice)
    }
}

fn ground_truth(slice: &MeasureSlice, cells: impl IntoIterator<Item = (usize, usize)>) -> Vec<[u32; 5]> {
    cells
        .into_iter()
        .flat_map(|(t, m)| {
            slice
                .cell(t, m)
                .iter()
                .map(move |n| [t as u32, m as u32, u32::from(n.pitch), n.onset, n.duration])
        })
        .collect()
}

/// Reasons a slice or file contributes no example.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Skip {
    EmptySlice,
    SingleTrack,
    NoEligibleTrack,
    EmptyLastMeasure,
    TooFewMeasures,
    Unreadable,
    Unencodable,
}

impl Skip {
    pub fn name(&self) -> &'static str {
        match self {
            Skip::EmptySlice => "empty_slice",
            Skip::SingleTrack => "single_track",
            Skip::NoEligibleTrack => "no_eligible_track",
            Skip::EmptyLastMeasure => "empty_last_measure",
            Skip::TooFewMeasures => "too_few_measures",
            Skip::Unreadable => "unreadable",
            Skip::Unencodable => "unencodable",
        }
    }
}

impl fmt::Display for Skip {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub test_mask_probability: f64,
    /// Per-family inclusion probability for training controls.
    pub control_probability: f64,
    /// Probabilities of none / 1D / 2D conditioning per masked cell.
    pub conditioning_probabilities: [f64; 3],
    pub max_slice_measures: usize,
    pub slices_per_file: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            test_mask_probability: 0.5,
            control_probability: 0.5,
            conditioning_probabilities: [0.5, 0.25, 0.25],
            max_slice_measures: TEST_SLICE_MEASURES,
            slices_per_file: 3,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<(), String> {
        let probs = [self.test_mask_probability, self.control_probability]
            .into_iter()
            .chain(self.conditioning_probabilities);
        for p in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("probability {p} outside [0, 1]"));
            }
        }
        let total: f64 = self.conditioning_probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(format!("conditioning probabilities sum to {total}, not 1"));
        }
        if self.test_mask_probability == 0.0 {
            return Err("test mask probability must be positive".into());
        }
        if self.max_slice_measures == 0 || self.slices_per_file == 0 {
            return Err("slice length and slices per file must be positive".into());
        }
        Ok(())
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-example RNG seed from the global seed, source id and slice index.
pub fn example_seed(global: u64, source: &str, index: usize) -> u64 {
    splitmix(splitmix(global ^ fnv1a(source.as_bytes())) ^ index as u64)
}

fn make_example(
    task: Task,
    source: &str,
    coords: SliceCoords,
    seed: u64,
    slice: &MeasureSlice,
    masks: &MaskSpec,
    controls: &ControlSpec,
) -> Result<InfillExample, EncodeError> {
    let pair = language::encode(slice, masks, controls)?;
    Ok(InfillExample {
        id: String::new(),
        task,
        source: source.to_string(),
        slice: coords,
        seed,
        prompt_ids: to_ids(&pair.prompt),
        target_ids: to_ids(&pair.target),
        prompt_text: render_text(&pair.prompt),
        ground_truth: ground_truth(slice, masks.cells()),
        auto_credited: Vec::new(),
    })
}

fn coords(slice: &MeasureSlice) -> SliceCoords {
    SliceCoords {
        start_measure: slice.start_measure,
        num_measures: slice.num_measures(),
    }
}

/// Random infilling: every track-measure masked independently.
pub fn build_random_infill(
    slice: &MeasureSlice,
    source: &str,
    seed: u64,
    config: &DatasetConfig,
) -> Result<InfillExample, Skip> {
    let slice = slice.without_empty_tracks();
    if slice.is_empty() {
        return Err(Skip::EmptySlice);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let masks = loop {
        let masks = MaskSpec::from_cells(
            (0..slice.num_tracks())
                .flat_map(|t| (0..slice.num_measures()).map(move |m| (t, m)))
                .filter(|_| rng.random_bool(config.test_mask_probability)),
        );
        if masks.cells().any(|(t, m)| !slice.cell(t, m).is_empty()) {
            break masks;
        }
    };
    make_example(Task::Random, source, coords(&slice), seed, &slice, &masks, &ControlSpec::new())
        .map_err(|_| Skip::Unencodable)
}

/// Number of measures in which track `t` has at least one onset.
pub fn active_measures(slice: &MeasureSlice, t: usize) -> usize {
    (0..slice.num_measures()).filter(|&m| !slice.cell(t, m).is_empty()).count()
}

pub fn eligible_tracks(slice: &MeasureSlice) -> Vec<usize> {
    (0..slice.num_tracks())
        .filter(|&t| active_measures(slice, t) >= TRACK_INFILL_MIN_MEASURES)
        .collect()
}

/// Track infilling: one eligible track masked in every measure.
pub fn build_track_infill(slice: &MeasureSlice, source: &str, seed: u64) -> Result<InfillExample, Skip> {
    let slice = slice.without_empty_tracks();
    if slice.is_empty() {
        return Err(Skip::EmptySlice);
    }
    if slice.num_tracks() < 2 {
        return Err(Skip::SingleTrack);
    }
    let eligible = eligible_tracks(&slice);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let &t = eligible.choose(&mut rng).ok_or(Skip::NoEligibleTrack)?;
    let masks = MaskSpec::from_cells((0..slice.num_measures()).map(|m| (t, m)));
    make_example(Task::Track, source, coords(&slice), seed, &slice, &masks, &ControlSpec::new())
        .map_err(|_| Skip::Unencodable)
}

/// Last-bar infilling: every track in the final measure masked.
pub fn build_last_bar(slice: &MeasureSlice, source: &str, seed: u64) -> Result<InfillExample, Skip> {
    let slice = slice.without_empty_tracks();
    if slice.is_empty() {
        return Err(Skip::EmptySlice);
    }
    let last = slice.num_measures() - 1;
    if (0..slice.num_tracks()).all(|t| slice.cell(t, last).is_empty()) {
        return Err(Skip::EmptyLastMeasure);
    }
    let masks = MaskSpec::from_cells((0..slice.num_tracks()).map(|t| (t, last)));
    make_example(Task::LastBar, source, coords(&slice), seed, &slice, &masks, &ControlSpec::new())
        .map_err(|_| Skip::Unencodable)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SampleError {
    #[error("score has no notes")]
    NoNotes,
    #[error("score has no measures")]
    NoMeasures,
    #[error(transparent)]
    Encode(#[from] EncodeError),
}

/// Training example: random slice of 1 to `max_slice_measures` measures,
/// random non-empty mask, random subset of the defined controls and random
/// rhythmic conditioning per masked cell.
pub fn sample_training_example(
    score: &QuantizedScore,
    source: &str,
    seed: u64,
    config: &DatasetConfig,
) -> Result<InfillExample, SampleError> {
    if score.num_measures() == 0 {
        return Err(SampleError::NoMeasures);
    }
    if score.note_count() == 0 {
        return Err(SampleError::NoNotes);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = rng.random_range(1..=config.max_slice_measures.min(score.num_measures()));
    let start = rng.random_range(0..=score.num_measures() - len);
    let mut slice = score.slice(start, len).expect("slice within score").without_empty_tracks();
    if slice.num_tracks() == 0 {
        // keep one (silent) track so a mask can still be drawn
        slice = score.slice(start, len).expect("slice within score");
        let first = slice.tracks()[0].clone();
        slice = MeasureSlice::new(slice.measure_lengths().to_vec(), vec![first]).expect("valid slice");
        slice.start_measure = start;
    }

    let rate: f64 = rng.random_range(0.0..1.0);
    let cells: Vec<(usize, usize)> = (0..slice.num_tracks())
        .flat_map(|t| (0..slice.num_measures()).map(move |m| (t, m)))
        .collect();
    let mut chosen: Vec<(usize, usize)> = cells.iter().copied().filter(|_| rng.random_bool(rate)).collect();
    if chosen.is_empty() {
        chosen.push(*cells.choose(&mut rng).expect("slice has cells"));
    }
    let [p_none, p_1d, _] = config.conditioning_probabilities;
    let mut masks = MaskSpec::new();
    for (t, m) in chosen {
        let u: f64 = rng.random_range(0.0..1.0);
        let c = if u < p_none {
            Conditioning::None
        } else if u < p_none + p_1d {
            Conditioning::OneD
        } else {
            Conditioning::TwoD
        };
        masks.insert(t, m, c);
    }

    let defined = defined_controls(&slice, &masks);
    let mut controls = ControlSpec::new();
    for (&t, families) in &defined.track {
        for &f in families {
            if rng.random_bool(config.control_probability) {
                controls.add_track(t, f);
            }
        }
    }
    for (&(t, m), families) in &defined.cell {
        for &f in families {
            if rng.random_bool(config.control_probability) {
                controls.add_cell(t, m, f);
            }
        }
    }
    Ok(make_example(Task::Train, source, coords(&slice), seed, &slice, &masks, &controls)?)
}

/// Rewrite an example's prompt to describe its masked content as fully as
/// the control vocabulary allows. Masked cells holding a single distinct
/// pitch are unmasked and listed in `auto_credited`.
pub fn apply_max_controls(example: &InfillExample) -> Result<InfillExample, ExampleError> {
    let slice = example.full_slice()?;
    let layout = example.layout()?;
    let mut masks = MaskSpec::new();
    let mut auto = Vec::new();
    for (t, m) in layout.masks.cells() {
        let pitches: BTreeSet<u8> = slice.cell(t, m).iter().map(|n| n.pitch).collect();
        if pitches.len() == 1 {
            auto.push([t as u32, m as u32]);
        } else {
            masks.insert(t, m, Conditioning::TwoD);
        }
    }
    let defined = defined_controls(&slice, &masks);
    let mut controls = ControlSpec::new();
    for (&t, families) in &defined.track {
        for &f in families {
            if matches!(f, ControlFamily::Step | ControlFamily::Leap) {
                controls.add_track(t, f);
            }
        }
    }
    for (&(t, m), families) in &defined.cell {
        for &f in families {
            if matches!(f, ControlFamily::StrictRange | ControlFamily::Dnoc) {
                controls.add_cell(t, m, f);
            }
        }
    }
    let pair = language::encode(&slice, &masks, &controls).map_err(|source| ExampleError::Encode {
        id: example.id.clone(),
        source,
    })?;
    let mut out = example.clone();
    out.prompt_ids = to_ids(&pair.prompt);
    out.target_ids = to_ids(&pair.target);
    out.prompt_text = render_text(&pair.prompt);
    out.auto_credited = auto;
    Ok(out)
}

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_jsonl<W: Write, T: Serialize>(mut out: W, records: &[T]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Read one JSON record per non-blank line. Errors name the 1-based line.
pub fn read_jsonl<R: BufRead, T: for<'de> Deserialize<'de>>(input: R) -> Result<Vec<T>, JsonlError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| JsonlError::Parse { line: i + 1, source })?);
    }
    Ok(out)
}

pub fn write_jsonl_file<T: Serialize>(path: &Path, records: &[T]) -> std::io::Result<()> {
    let file = std::fs::File::create(path)?;
    write_jsonl(std::io::BufWriter::new(file), records)
}

pub fn read_jsonl_file<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, JsonlError> {
    read_jsonl(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[derive(Debug, Clone)]
pub struct CorpusFile {
    pub source: String,
    pub bytes: Vec<u8>,
}

/// All `.mid`/`.midi` files below `dir`, sorted by relative path.
pub fn load_corpus_dir(dir: &Path) -> std::io::Result<Vec<CorpusFile>> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(&path, out)?;
            } else if path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("mid") || e.eq_ignore_ascii_case("midi"))
            {
                out.push(path);
            }
        }
        Ok(())
    }
    let mut paths = Vec::new();
    walk(dir, &mut paths)?;
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let source = p.strip_prefix(dir).unwrap_or(&p).to_string_lossy().replace('\\', "/");
            Ok(CorpusFile {
                source,
                bytes: std::fs::read(&p)?,
            })
        })
        .collect()
}

pub fn corpus_fingerprint(files: &[CorpusFile]) -> String {
    let mut h = Sha256::new();
    for f in files {
        h.update((f.source.len() as u64).to_le_bytes());
        h.update(f.source.as_bytes());
        h.update((f.bytes.len() as u64).to_le_bytes());
        h.update(&f.bytes);
    }
    format!("{:x}", h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub task: Task,
    pub seed: u64,
    pub requested: usize,
    pub max_controls: bool,
    pub counts: BTreeMap<Task, usize>,
    pub skips: BTreeMap<String, usize>,
    pub files: usize,
    pub corpus_fingerprint: String,
    pub masked_cells: usize,
    pub auto_credited_cells: usize,
    pub auto_credited_fraction: f64,
    pub config: DatasetConfig,
}

impl DatasetManifest {
    pub fn total_skips(&self) -> usize {
        self.skips.values().sum()
    }
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub task: Task,
    pub n: usize,
    pub seed: u64,
    pub max_controls: bool,
    pub jobs: usize,
    pub config: DatasetConfig,
}

/// Non-overlapping slice starts for a score of `num_measures` measures.
fn slice_starts(rng: &mut ChaCha8Rng, num_measures: usize, len: usize, count: usize) -> Vec<usize> {
    if num_measures < len {
        return Vec::new();
    }
    let mut candidates: Vec<usize> = (0..=num_measures - len).collect();
    candidates.shuffle(rng);
    let mut starts: Vec<usize> = Vec::new();
    for c in candidates {
        if starts.len() == count {
            break;
        }
        if starts.iter().all(|&s| c + len <= s || s + len <= c) {
            starts.push(c);
        }
    }
    starts.sort_unstable();
    starts
}

/// All examples (or skip reasons) from one score, in slice order.
pub fn examples_for_score(
    score: &QuantizedScore,
    source: &str,
    options: &BuildOptions,
) -> Vec<Result<InfillExample, Skip>> {
    let config = &options.config;
    if options.task == Task::Train {
        return (0..config.slices_per_file)
            .map(|i| {
                sample_training_example(score, source, example_seed(options.seed, source, i), config)
                    .map_err(|e| match e {
                        SampleError::NoNotes | SampleError::NoMeasures => Skip::EmptySlice,
                        SampleError::Encode(_) => Skip::Unencodable,
                    })
            })
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(example_seed(options.seed, source, usize::MAX));
    let starts = slice_starts(&mut rng, score.num_measures(), TEST_SLICE_MEASURES, config.slices_per_file);
    if starts.is_empty() {
        return vec![Err(Skip::TooFewMeasures)];
    }
    starts
        .into_iter()
        .enumerate()
        .map(|(i, start)| {
            let seed = example_seed(options.seed, source, i);
            let slice = score.slice(start, TEST_SLICE_MEASURES).expect("start within score");
            let example = match options.task {
                Task::Random => build_random_infill(&slice, source, seed, config),
                Task::Track => build_track_infill(&slice, source, seed),
                Task::LastBar => build_last_bar(&slice, source, seed),
                Task::Train => unreachable!(),
            }?;
            if options.max_controls {
                apply_max_controls(&example).map_err(|_| Skip::Unencodable)
            } else {
                Ok(example)
            }
        })
        .collect()
}

/// Build up to `n` examples over a corpus. Output order follows the file
/// order and is independent of `jobs`.
pub fn build_dataset(files: &[CorpusFile], options: &BuildOptions) -> (Vec<InfillExample>, DatasetManifest) {
    let work = |f: &CorpusFile| match load_midi(&f.bytes) {
        Ok(score) => examples_for_score(&score, &f.source, options),
        Err(_) => vec![Err(Skip::Unreadable)],
    };
    let per_file: Vec<Vec<Result<InfillExample, Skip>>> = if options.jobs <= 1 {
        files.iter().map(work).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .expect("thread pool");
        pool.install(|| files.par_iter().map(work).collect())
    };

    let mut examples = Vec::new();
    let mut skips: BTreeMap<String, usize> = BTreeMap::new();
    for result in per_file.into_iter().flatten() {
        if examples.len() == options.n {
            break;
        }
        match result {
            Ok(e) => examples.push(e),
            Err(skip) => *skips.entry(skip.to_string()).or_default() += 1,
        }
    }
    for (i, e) in examples.iter_mut().enumerate() {
        e.id = format!("{}-{:05}", options.task, i);
    }

    let mut masked_cells = 0;
    let mut auto = 0;
    for e in &examples {
        auto += e.auto_credited.len();
        masked_cells += e.auto_credited.len() + e.prompt_ids.iter().filter(|&&id| is_mask_id(id)).count();
    }
    let manifest = DatasetManifest {
        task: options.task,
        seed: options.seed,
        requested: options.n,
        max_controls: options.max_controls,
        counts: BTreeMap::from([(options.task, examples.len())]),
        skips,
        files: files.len(),
        corpus_fingerprint: corpus_fingerprint(files),
        masked_cells,
        auto_credited_cells: auto,
        auto_credited_fraction: if masked_cells == 0 {
            0.0
        } else {
            auto as f64 / masked_cells as f64
        },
        config: options.config.clone(),
    };
    (examples, manifest)
}

fn is_mask_id(id: u32) -> bool {
    matches!(Token::from_id(id), Ok(Token::Mask(_)))
}
