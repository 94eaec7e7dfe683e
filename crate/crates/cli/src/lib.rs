//! Subcommand implementations for the `trackfill` executable.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use trackfill::analysis::analyze;
use trackfill::dataset::{
    build_dataset, load_corpus_dir, read_jsonl_file, write_jsonl_file, BuildOptions, DatasetConfig, InfillExample, Task,
};
use trackfill::metrics::{compliance_samples, evaluate, success_rate_csv, success_rate_report, ComplyRecord, MatchPolicy};
use trackfill::midi::{load_midi, write_midi};
use trackfill::score::{MeasureSlice, QuantizedScore};
use trackfill::synth::{synth_corpus, SynthConfig};
use trackfill::request::{detokenize, tokenize, MaskFile, RequestError, Tokenized};
use trackfill::tokens::{parse_text, to_ids, vocabulary, vocabulary_fingerprint, Token, VOCAB_SIZE};

#[derive(Debug, Parser)]
#[command(name = "trackfill", version, about = "Multi-track symbolic music infilling toolkit")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for file-level parallelism.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measurement report for every track of a MIDI file.
    Analyze(AnalyzeArgs),
    /// Encode a MIDI file under a mask specification.
    Tokenize(TokenizeArgs),
    /// Decode prompt and target token text back into a MIDI file.
    Detokenize(DetokenizeArgs),
    /// Build training examples or an infilling test set from a corpus.
    MakeDataset(MakeDatasetArgs),
    /// Score model outputs against a test set.
    Eval(EvalArgs),
    /// Control compliance success rates for model outputs.
    Comply(ComplyArgs),
    /// Print the token vocabulary.
    Vocab(VocabArgs),
    /// Write a procedurally generated MIDI corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SliceArgs {
    /// First measure of the slice.
    #[arg(long, default_value_t = 0)]
    pub start: usize,
    /// Number of measures (default: to the end).
    #[arg(long)]
    pub measures: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub midi: PathBuf,
    /// Also report every track-measure.
    #[arg(long)]
    pub per_measure: bool,
    #[command(flatten)]
    pub slice: SliceArgs,
}

#[derive(Debug, Args)]
pub struct TokenizeArgs {
    pub midi: PathBuf,
    /// JSON mask specification (see docs/formats.md).
    #[arg(long)]
    pub masks: Option<PathBuf>,
    /// Print two lines of token text instead of JSON.
    #[arg(long)]
    pub text: bool,
}

#[derive(Debug, Args)]
pub struct DetokenizeArgs {
    /// JSON written by `tokenize`.
    #[arg(long, conflicts_with_all = ["prompt", "target"])]
    pub tokenized: Option<PathBuf>,
    /// File holding the prompt token text.
    #[arg(long, requires = "target")]
    pub prompt: Option<PathBuf>,
    /// File holding the target token text.
    #[arg(long, requires = "prompt")]
    pub target: Option<PathBuf>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaskArg {
    Train,
    Random,
    Track,
    #[value(alias = "last-bar")]
    Lastbar,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Train => Task::Train,
            TaskArg::Random => Task::Random,
            TaskArg::Track => Task::Track,
            TaskArg::Lastbar => Task::LastBar,
        }
    }
}

#[derive(Debug, Args)]
pub struct MakeDatasetArgs {
    pub corpus: PathBuf,
    #[arg(long, value_enum)]
    pub task: TaskArg,
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    /// Describe masked content with every applicable control.
    #[arg(long)]
    pub max_controls: bool,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Manifest path (default: `<out>.manifest.json`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// JSON file overriding dataset probabilities.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub examples: PathBuf,
    pub outputs: PathBuf,
    /// Directory for eval.csv and eval.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Require equal durations for a note match.
    #[arg(long)]
    pub match_duration: bool,
}

#[derive(Debug, Args)]
pub struct ComplyArgs {
    pub outputs: PathBuf,
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=1))]
    pub tolerance: u8,
    /// CSV destination (default: stdout).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Also write every compliance sample as JSONL.
    #[arg(long)]
    pub samples: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VocabArgs {
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub count: usize,
}

/// A failed or partial run: exit code plus a machine-readable reason.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
    pub details: Value,
}

impl Failure {
    fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            kind,
            message: message.into(),
            details: Value::Null,
        }
    }

    fn with(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({"status": if self.code == 1 { "partial" } else { "error" }, "kind": self.kind, "message": self.message});
        if !self.details.is_null() {
            v["details"] = self.details.clone();
        }
        v
    }
}

type CmdResult = Result<(), Failure>;

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::new("io", format!("{}: {e}", path.display()))
}

fn require_file(path: &Path) -> CmdResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::new("io", format!("{}: no such file", path.display())))
    }
}

fn require_parent(path: &Path) -> CmdResult {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => {
            Err(Failure::new("io", format!("{}: directory does not exist", p.display())))
        }
        _ => Ok(()),
    }
}

fn read_score(path: &Path) -> Result<QuantizedScore, Failure> {
    require_file(path)?;
    let bytes = fs::read(path).map_err(io_err(path))?;
    load_midi(&bytes).map_err(|e| Failure::new("midi", format!("{}: {e}", path.display())))
}

fn slice_of(score: &QuantizedScore, args: &SliceArgs) -> Result<MeasureSlice, Failure> {
    let n = args
        .measures
        .unwrap_or_else(|| score.num_measures().saturating_sub(args.start));
    score
        .slice(args.start, n)
        .map_err(|e| Failure::new("slice", e.to_string()))
}

fn print_json(out: &mut dyn Write, value: &impl Serialize) -> CmdResult {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| Failure::new("io", e.to_string()))?;
    writeln!(out).map_err(|e| Failure::new("io", e.to_string()))
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> CmdResult {
    match &cli.command {
        Command::Analyze(a) => cmd_analyze(a, out),
        Command::Tokenize(a) => cmd_tokenize(a, out),
        Command::Detokenize(a) => cmd_detokenize(a, out),
        Command::MakeDataset(a) => cmd_make_dataset(a, cli.seed, cli.jobs, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Comply(a) => cmd_comply(a, out),
        Command::Vocab(a) => cmd_vocab(a, out),
        Command::Synth(a) => cmd_synth(a, cli.seed, out),
    }
}

fn cmd_analyze(args: &AnalyzeArgs, out: &mut dyn Write) -> CmdResult {
    let score = read_score(&args.midi)?;
    let slice = slice_of(&score, &args.slice)?;
    print_json(out, &analyze(&slice, args.per_measure))
}

fn request_failure(e: RequestError) -> Failure {
    let f = Failure::new(e.kind(), e.to_string());
    match e.sequence() {
        Some(seq) => f.with(json!({"offset": e.offset(), "sequence": seq})),
        None => f,
    }
}

fn cmd_tokenize(args: &TokenizeArgs, out: &mut dyn Write) -> CmdResult {
    let request: MaskFile = match &args.masks {
        Some(p) => {
            require_file(p)?;
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            serde_json::from_str(&text).map_err(|e| Failure::new("mask_spec", format!("{}: {e}", p.display())))?
        }
        None => MaskFile::default(),
    };
    let score = read_score(&args.midi)?;
    let tokenized = tokenize(&score, &request).map_err(request_failure)?;
    if args.text {
        writeln!(out, "{}\n{}", tokenized.prompt_text, tokenized.target_text).map_err(|e| Failure::new("io", e.to_string()))
    } else {
        print_json(out, &tokenized)
    }
}

fn cmd_detokenize(args: &DetokenizeArgs, out: &mut dyn Write) -> CmdResult {
    require_parent(&args.out)?;
    let (prompt_text, target_text) = match (&args.tokenized, &args.prompt, &args.target) {
        (Some(path), _, _) => {
            require_file(path)?;
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            let t: Tokenized =
                serde_json::from_str(&text).map_err(|e| Failure::new("input", format!("{}: {e}", path.display())))?;
            (t.prompt_text, t.target_text)
        }
        (None, Some(p), Some(t)) => {
            require_file(p)?;
            require_file(t)?;
            (
                fs::read_to_string(p).map_err(io_err(p))?,
                fs::read_to_string(t).map_err(io_err(t))?,
            )
        }
        _ => return Err(Failure::new("usage", "give --tokenized, or both --prompt and --target")),
    };
    let (score, decoded) = detokenize(&prompt_text, &target_text).map_err(request_failure)?;
    let bytes = write_midi(&score).map_err(|e| Failure::new("midi", e.to_string()))?;
    fs::write(&args.out, bytes).map_err(io_err(&args.out))?;
    print_json(
        out,
        &json!({"out": args.out, "tracks": score.tracks.len(), "measures": score.num_measures(),
                "notes": score.note_count(), "complete": decoded.complete}),
    )
}

fn cmd_make_dataset(args: &MakeDatasetArgs, seed: u64, jobs: usize, out: &mut dyn Write) -> CmdResult {
    if !args.corpus.is_dir() {
        return Err(Failure::new("io", format!("{}: not a directory", args.corpus.display())));
    }
    require_parent(&args.out)?;
    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.manifest.json", args.out.display())));
    require_parent(&manifest_path)?;
    let config: DatasetConfig = match &args.config {
        Some(p) => {
            require_file(p)?;
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            serde_json::from_str(&text).map_err(|e| Failure::new("config", format!("{}: {e}", p.display())))?
        }
        None => DatasetConfig::default(),
    };
    config.validate().map_err(|e| Failure::new("config", e))?;

    let files = load_corpus_dir(&args.corpus).map_err(io_err(&args.corpus))?;
    let options = BuildOptions {
        task: args.task.into(),
        n: args.n,
        seed,
        max_controls: args.max_controls,
        jobs: jobs.max(1),
        config,
    };
    let (examples, manifest) = build_dataset(&files, &options);
    if examples.is_empty() {
        return Err(Failure::new("empty_dataset", "no examples produced")
            .with(json!({"files": files.len(), "skips": manifest.skips})));
    }
    write_jsonl_file(&args.out, &examples).map_err(io_err(&args.out))?;
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::new("io", e.to_string()))?;
    fs::write(&manifest_path, text + "\n").map_err(io_err(&manifest_path))?;
    print_json(out, &json!({"out": args.out, "manifest": manifest_path, "examples": examples.len(), "skips": manifest.skips}))?;
    if manifest.total_skips() > 0 {
        return Err(Failure {
            code: 1,
            kind: "skipped",
            message: format!("{} slices or files skipped", manifest.total_skips()),
            details: json!(manifest.skips),
        });
    }
    Ok(())
}

/// One model output, keyed by example id.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputRecord {
    pub id: String,
    #[serde(default)]
    pub target_ids: Option<Vec<u32>>,
    #[serde(default)]
    pub target_text: Option<String>,
}

fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> CmdResult {
    require_file(&args.examples)?;
    require_file(&args.outputs)?;
    fs::create_dir_all(&args.out_dir).map_err(io_err(&args.out_dir))?;
    let examples: Vec<InfillExample> =
        read_jsonl_file(&args.examples).map_err(|e| Failure::new("input", format!("{}: {e}", args.examples.display())))?;
    let records: Vec<OutputRecord> =
        read_jsonl_file(&args.outputs).map_err(|e| Failure::new("input", format!("{}: {e}", args.outputs.display())))?;
    let mut outputs = BTreeMap::new();
    for r in records {
        let ids = match (r.target_ids, r.target_text) {
            (Some(ids), _) => ids,
            (None, Some(text)) => to_ids(&parse_text(&text).map_err(|e| Failure::new("grammar", format!("{}: {e}", r.id)))?),
            (None, None) => return Err(Failure::new("input", format!("output `{}` has no target", r.id))),
        };
        outputs.insert(r.id, ids);
    }
    let policy = if args.match_duration {
        MatchPolicy::PitchOnsetDuration
    } else {
        MatchPolicy::PitchOnset
    };
    let report = evaluate(&examples, &outputs, policy).map_err(|e| match e {
        trackfill::metrics::EvalError::MissingOutputs(ids) => {
            Failure::new("missing_outputs", format!("{} example ids have no output", ids.len())).with(json!(ids))
        }
        other => Failure::new("input", other.to_string()),
    })?;
    let csv = args.out_dir.join("eval.csv");
    fs::write(&csv, report.to_csv()).map_err(io_err(&csv))?;
    let detail = args.out_dir.join("eval.json");
    let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::new("io", e.to_string()))?;
    fs::write(&detail, text + "\n").map_err(io_err(&detail))?;
    print_json(out, &report.aggregate)
}

fn cmd_comply(args: &ComplyArgs, out: &mut dyn Write) -> CmdResult {
    require_file(&args.outputs)?;
    if let Some(p) = &args.out {
        require_parent(p)?;
    }
    let records: Vec<ComplyRecord> =
        read_jsonl_file(&args.outputs).map_err(|e| Failure::new("input", format!("{}: {e}", args.outputs.display())))?;
    let mut samples = Vec::new();
    for r in &records {
        samples.extend(compliance_samples(r).map_err(|e| Failure::new("input", e))?);
    }
    let rows = success_rate_report(&samples, args.tolerance).map_err(|e| Failure::new("input", e.to_string()))?;
    let csv = success_rate_csv(&rows);
    if let Some(p) = &args.samples {
        write_jsonl_file(p, &samples).map_err(io_err(p))?;
    }
    match &args.out {
        Some(p) => {
            fs::write(p, &csv).map_err(io_err(p))?;
            print_json(out, &json!({"out": p, "records": records.len(), "samples": samples.len(), "tokens": rows.len()}))
        }
        None => out.write_all(csv.as_bytes()).map_err(|e| Failure::new("io", e.to_string())),
    }
}

fn cmd_vocab(args: &VocabArgs, out: &mut dyn Write) -> CmdResult {
    let tokens: Vec<String> = vocabulary().iter().map(Token::to_string).collect();
    if args.json {
        print_json(out, &json!({"size": VOCAB_SIZE, "fingerprint": vocabulary_fingerprint(), "tokens": tokens}))
    } else {
        let mut text = String::new();
        for (id, t) in tokens.iter().enumerate() {
            text.push_str(&format!("{id}\t{t}\n"));
        }
        out.write_all(text.as_bytes()).map_err(|e| Failure::new("io", e.to_string()))
    }
}

fn cmd_synth(args: &SynthArgs, seed: u64, out: &mut dyn Write) -> CmdResult {
    fs::create_dir_all(&args.out_dir).map_err(io_err(&args.out_dir))?;
    let files = synth_corpus(args.count, seed, &SynthConfig::default());
    for f in &files {
        let path = args.out_dir.join(&f.source);
        fs::write(&path, &f.bytes).map_err(io_err(&path))?;
    }
    print_json(out, &json!({"out_dir": args.out_dir, "files": files.len()}))
}
