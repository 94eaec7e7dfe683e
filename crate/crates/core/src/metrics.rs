//! Objective infilling metrics and control compliance.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controls::{satisfies_loose_range, satisfies_strict_range, Control, ControlFamily};
use crate::dataset::InfillExample;
use crate::language::{decode_salvage, parse_prompt, Decoded, PromptLayout};
use crate::measure::{self, chromagram, differs_from_all, Chromagram, MeasurementKind};
use crate::score::{Note, NoteSpan};
use crate::tokens::{from_ids, parse_text, Token};

/// A note located in a track-measure; onset is measure-relative.
pub type CellNote = (usize, usize, Note);

/// What makes a predicted note equal to a ground-truth note.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchPolicy {
    #[default]
    PitchOnset,
    PitchOnsetDuration,
}

impl MatchPolicy {
    fn key(self, &(t, m, n): &CellNote) -> (usize, usize, u8, u32, u32) {
        let duration = match self {
            MatchPolicy::PitchOnset => 0,
            MatchPolicy::PitchOnsetDuration => n.duration,
        };
        (t, m, n.pitch, n.onset, duration)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoteMatchReport {
    pub true_positives: usize,
    pub predicted_count: usize,
    pub truth_count: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl NoteMatchReport {
    pub fn from_counts(true_positives: usize, predicted_count: usize, truth_count: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        let precision = ratio(true_positives, predicted_count);
        let recall = ratio(true_positives, truth_count);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        NoteMatchReport {
            true_positives,
            predicted_count,
            truth_count,
            precision,
            recall,
            f1,
        }
    }
}

/// One-to-one note matching. Truth notes in `auto_credited` cells count as
/// predicted and matched; predictions in those cells are ignored.
pub fn note_prf(
    truth: &[CellNote],
    predicted: &[CellNote],
    auto_credited: &BTreeSet<(usize, usize)>,
    policy: MatchPolicy,
) -> NoteMatchReport {
    let credited = |n: &&CellNote| auto_credited.contains(&(n.0, n.1));
    let auto = truth.iter().filter(credited).count();
    let mut pool: HashMap<_, usize> = HashMap::new();
    for n in truth.iter().filter(|n| !credited(n)) {
        *pool.entry(policy.key(n)).or_default() += 1;
    }
    let mut tp = 0;
    let mut predicted_count = 0;
    for n in predicted.iter().filter(|n| !credited(n)) {
        predicted_count += 1;
        if let Some(c) = pool.get_mut(&policy.key(n)) {
            if *c > 0 {
                *c -= 1;
                tp += 1;
            }
        }
    }
    NoteMatchReport::from_counts(tp + auto, predicted_count + auto, truth.len())
}

/// Shannon entropy in bits of the 12-bin pitch-class histogram.
pub fn pitch_class_entropy(notes: &[Note]) -> f64 {
    if notes.is_empty() {
        return 0.0;
    }
    let mut hist = [0usize; 12];
    for n in notes {
        hist[usize::from(n.pitch % 12)] += 1;
    }
    let total = notes.len() as f64;
    hist.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum()
}

/// `|H(truth) - H(predicted)| / log2(12)`, as a percentage.
pub fn pch_entropy_difference(truth: &[Note], predicted: &[Note]) -> f64 {
    (pitch_class_entropy(truth) - pitch_class_entropy(predicted)).abs() / 12f64.log2() * 100.0
}

/// One track-measure compared by [`groove_similarity`].
#[derive(Debug, Clone, Copy)]
pub struct GrooveCell<'a> {
    pub length: u32,
    pub truth: &'a [Note],
    pub predicted: &'a [Note],
}

fn onset_vector(notes: &[Note], length: u32) -> Vec<bool> {
    let mut v = vec![false; length as usize];
    for n in notes {
        if n.onset < length {
            v[n.onset as usize] = true;
        }
    }
    v
}

pub fn cell_groove_similarity(length: u32, truth: &[Note], predicted: &[Note]) -> f64 {
    if length == 0 {
        return 1.0;
    }
    let a = onset_vector(truth, length);
    let b = onset_vector(predicted, length);
    let hamming = a.iter().zip(&b).filter(|(x, y)| x != y).count();
    1.0 - hamming as f64 / f64::from(length)
}

/// Mean per-cell onset-vector similarity as a percentage; 100 for no cells.
pub fn groove_similarity(cells: &[GrooveCell<'_>]) -> f64 {
    if cells.is_empty() {
        return 100.0;
    }
    let total: f64 = cells
        .iter()
        .map(|c| cell_groove_similarity(c.length, c.truth, c.predicted))
        .sum();
    total / cells.len() as f64 * 100.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeStatus {
    Ok,
    Truncated,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleScore {
    pub id: String,
    pub task: String,
    pub status: DecodeStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub notes: NoteMatchReport,
    /// Percent.
    pub entropy_difference: f64,
    /// Percent.
    pub groove_similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub examples: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub entropy_difference: f64,
    pub groove_similarity: f64,
    pub truncated: usize,
    pub invalid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub policy: MatchPolicy,
    pub examples: Vec<ExampleScore>,
    pub aggregate: Aggregate,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("outputs missing for example ids: {}", .0.join(", "))]
    MissingOutputs(Vec<String>),
    #[error("example `{id}`: {reason}")]
    BadExample { id: String, reason: String },
}

/// Convert ids up to the first invalid one; report whether all converted.
fn lenient_tokens(ids: &[u32]) -> (Vec<Token>, Option<String>) {
    let mut out = Vec::with_capacity(ids.len());
    for (i, &id) in ids.iter().enumerate() {
        match Token::from_id(id) {
            Ok(t) => out.push(t),
            Err(e) => return (out, Some(format!("token {i}: {e}"))),
        }
    }
    (out, None)
}

/// Score one model output against an example's ground truth.
pub fn score_example(example: &InfillExample, output: &[u32], policy: MatchPolicy) -> Result<ExampleScore, EvalError> {
    let bad = |reason: String| EvalError::BadExample {
        id: example.id.clone(),
        reason,
    };
    let prompt = from_ids(&example.prompt_ids).map_err(|e| bad(e.to_string()))?;
    let layout = parse_prompt(&prompt).map_err(|e| bad(e.to_string()))?;
    let (tokens, id_error) = lenient_tokens(output);
    let decoded = decode_salvage(&tokens, &layout.masks, &layout.geometry());
    let (status, error) = match (&id_error, &decoded.error) {
        (Some(e), _) => (DecodeStatus::Invalid, Some(e.clone())),
        (None, Some(e)) => (DecodeStatus::Invalid, Some(e.to_string())),
        (None, None) if !decoded.complete => (DecodeStatus::Truncated, None),
        _ => (DecodeStatus::Ok, None),
    };
    Ok(score_decoded(example, &layout, &decoded, status, error, policy))
}

fn score_decoded(
    example: &InfillExample,
    layout: &PromptLayout,
    decoded: &Decoded,
    status: DecodeStatus,
    error: Option<String>,
    policy: MatchPolicy,
) -> ExampleScore {
    let truth_cells = example.truth_cells();
    let auto = example.auto_credited_cells();
    let truth: Vec<CellNote> = truth_cells
        .iter()
        .flat_map(|(&(t, m), notes)| notes.iter().map(move |&n| (t, m, n)))
        .collect();
    let predicted: Vec<CellNote> = decoded
        .cells
        .iter()
        .flat_map(|c| c.notes.iter().map(move |&n| (c.track, c.measure, n)))
        .collect();
    let notes = note_prf(&truth, &predicted, &auto, policy);

    // auto-credited cells enter every metric as if reproduced exactly
    let empty: Vec<Note> = Vec::new();
    let lengths = &layout.slice.measure_lengths();
    let mut groove = Vec::new();
    let mut truth_all = Vec::new();
    let mut pred_all = Vec::new();
    for c in &decoded.cells {
        let t = truth_cells.get(&(c.track, c.measure)).unwrap_or(&empty);
        groove.push(GrooveCell {
            length: lengths[c.measure],
            truth: t,
            predicted: &c.notes,
        });
        truth_all.extend_from_slice(t);
        pred_all.extend_from_slice(&c.notes);
    }
    for &(tr, m) in &auto {
        let t = truth_cells.get(&(tr, m)).unwrap_or(&empty);
        groove.push(GrooveCell {
            length: lengths[m],
            truth: t,
            predicted: t,
        });
        truth_all.extend_from_slice(t);
        pred_all.extend_from_slice(t);
    }

    ExampleScore {
        id: example.id.clone(),
        task: example.task.to_string(),
        status,
        error,
        notes,
        entropy_difference: pch_entropy_difference(&truth_all, &pred_all),
        groove_similarity: groove_similarity(&groove),
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn aggregate(scores: &[ExampleScore]) -> Aggregate {
    Aggregate {
        examples: scores.len(),
        precision: mean(scores.iter().map(|s| s.notes.precision * 100.0)),
        recall: mean(scores.iter().map(|s| s.notes.recall * 100.0)),
        f1: mean(scores.iter().map(|s| s.notes.f1 * 100.0)),
        entropy_difference: mean(scores.iter().map(|s| s.entropy_difference)),
        groove_similarity: mean(scores.iter().map(|s| s.groove_similarity)),
        truncated: scores.iter().filter(|s| s.status == DecodeStatus::Truncated).count(),
        invalid: scores.iter().filter(|s| s.status == DecodeStatus::Invalid).count(),
    }
}

/// Score every example against the output with the same id.
pub fn evaluate(
    examples: &[InfillExample],
    outputs: &BTreeMap<String, Vec<u32>>,
    policy: MatchPolicy,
) -> Result<EvalReport, EvalError> {
    let missing: Vec<String> = examples
        .iter()
        .filter(|e| !outputs.contains_key(&e.id))
        .map(|e| e.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingOutputs(missing));
    }
    let scores = examples
        .iter()
        .map(|e| score_example(e, &outputs[&e.id], policy))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport {
        policy,
        aggregate: aggregate(&scores),
        examples: scores,
    })
}

pub const EVAL_CSV_HEADER: &str =
    "id,task,status,true_positives,predicted_count,truth_count,precision,recall,f1,entropy_difference,groove_similarity";

impl EvalReport {
    /// Per-example rows followed by a `mean` row. Rates are percentages.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(EVAL_CSV_HEADER);
        out.push('\n');
        let status = |s: DecodeStatus| match s {
            DecodeStatus::Ok => "ok",
            DecodeStatus::Truncated => "truncated",
            DecodeStatus::Invalid => "invalid",
        };
        for s in &self.examples {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
                s.id,
                s.task,
                status(s.status),
                s.notes.true_positives,
                s.notes.predicted_count,
                s.notes.truth_count,
                s.notes.precision * 100.0,
                s.notes.recall * 100.0,
                s.notes.f1 * 100.0,
                s.entropy_difference,
                s.groove_similarity
            ));
        }
        let a = &self.aggregate;
        out.push_str(&format!(
            "mean,,,,,,{:.4},{:.4},{:.4},{:.4},{:.4}\n",
            a.precision, a.recall, a.f1, a.entropy_difference, a.groove_similarity
        ));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceResult {
    pub control: String,
    pub observed: Option<f64>,
    pub target_bin: Option<u8>,
    pub observed_bin: Option<u8>,
    pub satisfied: bool,
    pub satisfied_within_one_bin: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl ComplianceResult {
    pub fn success(&self, tolerance: u8) -> bool {
        if tolerance == 0 {
            self.satisfied
        } else {
            self.satisfied_within_one_bin
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ComplianceError {
    #[error("`{0}` is not a control token")]
    NotAControl(String),
    #[error("tolerance must be 0 or 1 bins, got {0}")]
    BadTolerance(u8),
}

/// Whether `output` is described by `control`. `context` holds the
/// chromagrams of the other track-measures sounding in the same measure
/// (used by DNOC only). Exact and one-bin-tolerant outcomes are both
/// reported; they coincide for DNOC and ranges.
pub fn check_compliance(output: &NoteSpan, control: &Control, context: &[Chromagram]) -> ComplianceResult {
    let mut result = ComplianceResult {
        control: control.label(),
        observed: None,
        target_bin: None,
        observed_bin: None,
        satisfied: false,
        satisfied_within_one_bin: false,
        reason: None,
    };
    let exact = match *control {
        Control::Binned { kind, bin } => {
            result.target_bin = Some(bin);
            match measure::measure(kind, output) {
                Ok(m) => {
                    result.observed = Some(m.value());
                    result.observed_bin = Some(m.bin());
                    result.satisfied_within_one_bin = m.bin().abs_diff(bin) <= 1;
                    m.bin() == bin
                }
                Err(_) => {
                    result.reason = Some("undefined".into());
                    false
                }
            }
        }
        Control::Dnoc => {
            let own = chromagram(&output.notes);
            if own.is_empty() {
                result.reason = Some("undefined".into());
            }
            differs_from_all(&own, context)
        }
        Control::StrictRange { low, high } | Control::LooseRange { low, high } => {
            if output.notes.is_empty() {
                result.reason = Some("undefined".into());
            }
            if matches!(control, Control::StrictRange { .. }) {
                satisfies_strict_range(&output.notes, low, high)
            } else {
                satisfies_loose_range(&output.notes, low, high)
            }
        }
    };
    result.satisfied = exact;
    if !matches!(control, Control::Binned { .. }) {
        result.satisfied_within_one_bin = exact;
    }
    result
}

/// Token-level entry point: single control tokens only (binned or DNOC).
pub fn check_compliance_token(output: &NoteSpan, token: Token, context: &[Chromagram]) -> Result<ComplianceResult, ComplianceError> {
    let control = Control::from_token(token).ok_or_else(|| ComplianceError::NotAControl(token.to_string()))?;
    Ok(check_compliance(output, &control, context))
}

/// One compliance observation: the token under test, whether it was in the
/// prompt, and how the output fared against it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceSample {
    pub token: String,
    pub supplied: bool,
    pub result: ComplianceResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessRow {
    pub token: String,
    pub tolerance: u8,
    pub n_conditioned: usize,
    pub n_unconditioned: usize,
    pub success_rate: Option<f64>,
    pub baseline_rate: Option<f64>,
    pub success_rate_exact: Option<f64>,
    pub success_rate_within_one: Option<f64>,
    pub baseline_rate_exact: Option<f64>,
    pub baseline_rate_within_one: Option<f64>,
}

pub const SUCCESS_CSV_HEADER: &str = "token,tolerance,n_conditioned,n_unconditioned,success_rate,baseline_rate,success_rate_exact,success_rate_within_one,baseline_rate_exact,baseline_rate_within_one";

/// Rates of success with and without the token supplied, per token, in
/// vocabulary order.
pub fn success_rate_report(samples: &[ComplianceSample], tolerance: u8) -> Result<Vec<SuccessRow>, ComplianceError> {
    if tolerance > 1 {
        return Err(ComplianceError::BadTolerance(tolerance));
    }
    let mut groups: BTreeMap<(usize, String), [Vec<&ComplianceResult>; 2]> = BTreeMap::new();
    for s in samples {
        let order = token_order(&s.token);
        groups.entry((order, s.token.clone())).or_default()[usize::from(s.supplied)].push(&s.result);
    }
    let rate = |rs: &[&ComplianceResult], f: &dyn Fn(&ComplianceResult) -> bool| {
        (!rs.is_empty()).then(|| rs.iter().filter(|r| f(r)).count() as f64 / rs.len() as f64)
    };
    Ok(groups
        .into_iter()
        .map(|((_, token), [unconditioned, conditioned])| SuccessRow {
            token,
            tolerance,
            n_conditioned: conditioned.len(),
            n_unconditioned: unconditioned.len(),
            success_rate: rate(&conditioned, &|r| r.success(tolerance)),
            baseline_rate: rate(&unconditioned, &|r| r.success(tolerance)),
            success_rate_exact: rate(&conditioned, &|r| r.satisfied),
            success_rate_within_one: rate(&conditioned, &|r| r.satisfied_within_one_bin),
            baseline_rate_exact: rate(&unconditioned, &|r| r.satisfied),
            baseline_rate_within_one: rate(&unconditioned, &|r| r.satisfied_within_one_bin),
        })
        .collect())
}

fn token_order(label: &str) -> usize {
    if let Ok(tokens) = parse_text(label) {
        if let [t] = tokens[..] {
            return t.id().unwrap_or(u32::MAX) as usize;
        }
    }
    match label {
        "strict_range" => Token::RangeHighStrict.id().unwrap() as usize,
        "loose_range" => Token::RangeHighLoose.id().unwrap() as usize,
        _ => usize::MAX,
    }
}

pub fn success_rate_csv(rows: &[SuccessRow]) -> String {
    let f = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6}"));
    let mut out = String::from(SUCCESS_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.token,
            r.tolerance,
            r.n_conditioned,
            r.n_unconditioned,
            f(r.success_rate),
            f(r.baseline_rate),
            f(r.success_rate_exact),
            f(r.success_rate_within_one),
            f(r.baseline_rate_exact),
            f(r.baseline_rate_within_one)
        ));
    }
    out
}

/// A model output to audit: the prompt that produced it (declaring the
/// supplied controls) and the generated target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplyRecord {
    pub id: String,
    pub prompt_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_ids: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_text: Option<String>,
}

/// Compliance samples for one output.
///
/// Declared controls give conditioned samples over the scope they were
/// declared for. Each masked track with no control of a binned family
/// gives one unconditioned sample per bin of that family (over the track's
/// masked measures), and each non-empty masked cell without DNOC gives an
/// unconditioned DNOC sample.
pub fn compliance_samples(record: &ComplyRecord) -> Result<Vec<ComplianceSample>, String> {
    let prompt = parse_text(&record.prompt_text).map_err(|e| format!("{}: prompt: {e}", record.id))?;
    let layout = parse_prompt(&prompt).map_err(|e| format!("{}: prompt: {e}", record.id))?;
    let target = match (&record.target_ids, &record.target_text) {
        (Some(ids), _) => lenient_tokens(ids).0,
        (None, Some(text)) => parse_text(text).map_err(|e| format!("{}: target: {e}", record.id))?,
        (None, None) => return Err(format!("{}: neither target_ids nor target_text", record.id)),
    };
    let decoded = decode_salvage(&target, &layout.masks, &layout.geometry());
    let output = layout.fill(&decoded);

    let context = |t: usize, m: usize| -> Vec<Chromagram> {
        (0..output.num_tracks())
            .filter(|&o| o != t)
            .map(|o| chromagram(output.cell(o, m)))
            .collect()
    };

    let mut samples = Vec::new();
    let mut push = |control: &Control, supplied: bool, result: ComplianceResult| {
        samples.push(ComplianceSample {
            token: control.label(),
            supplied,
            result,
        });
    };

    for (&(t, m), controls) in &layout.cell_controls {
        let span = output.span(t, [m]);
        for c in controls {
            push(c, true, check_compliance(&span, c, &context(t, m)));
        }
    }
    let mut masked_tracks: BTreeSet<usize> = BTreeSet::new();
    for (t, _) in layout.masks.cells() {
        masked_tracks.insert(t);
    }
    for &t in &masked_tracks {
        let measures = layout.masks.masked_measures(t);
        let span = output.span(t, measures.iter().copied());
        let declared: BTreeSet<ControlFamily> = layout
            .track_controls
            .get(&t)
            .into_iter()
            .flatten()
            .chain(
                measures
                    .iter()
                    .filter_map(|&m| layout.cell_controls.get(&(t, m)))
                    .flatten(),
            )
            .map(Control::family)
            .collect();
        for c in layout.track_controls.get(&t).into_iter().flatten() {
            push(c, true, check_compliance(&span, c, &[]));
        }
        for kind in MeasurementKind::ALL {
            let family = Control::binned(kind, 0).family();
            if declared.contains(&family) {
                continue;
            }
            for bin in 0..kind.num_bins() {
                let c = Control::binned(kind, bin);
                push(&c, false, check_compliance(&span, &c, &[]));
            }
        }
        for &m in &measures {
            let has_dnoc = layout
                .cell_controls
                .get(&(t, m))
                .is_some_and(|cs| cs.contains(&Control::Dnoc));
            if !has_dnoc && !output.cell(t, m).is_empty() {
                push(&Control::Dnoc, false, check_compliance(&output.span(t, [m]), &Control::Dnoc, &context(t, m)));
            }
        }
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::TICKS_PER_QUARTER;

    fn cn(t: usize, m: usize, pitch: u8, onset: u32) -> CellNote {
        (t, m, Note::new(pitch, onset, 6))
    }

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn prf_examples() {
        let none = BTreeSet::new();
        let truth = vec![cn(0, 0, 60, 0), cn(0, 0, 64, 0)];
        let r = note_prf(&truth, &truth, &none, MatchPolicy::PitchOnset);
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));

        let pred = vec![cn(0, 0, 60, 0), cn(0, 0, 65, 0)];
        let r = note_prf(&truth, &pred, &none, MatchPolicy::PitchOnset);
        assert_eq!(r.true_positives, 1);
        assert_eq!((r.precision, r.recall, r.f1), (0.5, 0.5, 0.5));

        let r = note_prf(&truth, &truth[..1], &none, MatchPolicy::PitchOnset);
        assert!(approx(r.precision, 1.0) && approx(r.recall, 0.5) && approx(r.f1, 2.0 / 3.0));

        let r = note_prf(&[], &[], &none, MatchPolicy::PitchOnset);
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        let r = note_prf(&truth, &[], &none, MatchPolicy::PitchOnset);
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 0.0, 0.0));
    }

    #[test]
    fn prf_matching_is_one_to_one_and_policy_switch() {
        let none = BTreeSet::new();
        let truth = vec![cn(0, 0, 60, 0)];
        let pred = vec![cn(0, 0, 60, 0), cn(0, 0, 60, 0)];
        let r = note_prf(&truth, &pred, &none, MatchPolicy::PitchOnset);
        assert_eq!(r.true_positives, 1);
        let longer = vec![(0, 0, Note::new(60, 0, 12))];
        assert_eq!(note_prf(&truth, &longer, &none, MatchPolicy::PitchOnset).true_positives, 1);
        assert_eq!(note_prf(&truth, &longer, &none, MatchPolicy::PitchOnsetDuration).true_positives, 0);
        // other cell never matches
        assert_eq!(note_prf(&truth, &[cn(1, 0, 60, 0)], &none, MatchPolicy::PitchOnset).true_positives, 0);
    }

    #[test]
    fn auto_credit_counts_truth() {
        let auto = BTreeSet::from([(0, 1)]);
        let truth = vec![cn(0, 0, 60, 0), cn(0, 1, 40, 0), cn(0, 1, 40, 24)];
        let r = note_prf(&truth, &[], &auto, MatchPolicy::PitchOnset);
        assert_eq!((r.true_positives, r.predicted_count, r.truth_count), (2, 2, 3));
        assert_eq!(r.precision, 1.0);
    }

    #[test]
    fn entropy_examples() {
        let c = |p: u8| Note::new(p, 0, 6);
        let single = vec![c(60)];
        let uniform: Vec<Note> = (60..72).map(c).collect();
        assert_eq!(pch_entropy_difference(&single, &single), 0.0);
        assert!(approx(pch_entropy_difference(&single, &uniform), 100.0));
        // C major scale: 7 equiprobable classes
        let scale: Vec<Note> = [60, 62, 64, 65, 67, 69, 71].into_iter().map(c).collect();
        let repeated: Vec<Note> = (0..7).map(|_| c(60)).collect();
        let expected = 7f64.log2() / 12f64.log2() * 100.0;
        assert!(approx(pch_entropy_difference(&scale, &repeated), expected));
        assert_eq!(pch_entropy_difference(&[], &[]), 0.0);
    }

    #[test]
    fn groove_examples() {
        let four: Vec<Note> = (0..4).map(|q| Note::new(60, q * TICKS_PER_QUARTER, 6)).collect();
        let other_pitch: Vec<Note> = four.iter().map(|n| Note { pitch: 70, ..*n }).collect();
        let g = |t: &[Note], p: &[Note]| groove_similarity(&[GrooveCell { length: 96, truth: t, predicted: p }]);
        assert_eq!(g(&four, &other_pitch), 100.0);
        assert!(approx(g(&four, &[]), (1.0 - 4.0 / 96.0) * 100.0));
        assert_eq!(g(&[], &[]), 100.0);
        assert_eq!(g(&four[..2], &four[1..]), g(&four[1..], &four[..2]));
    }

    fn span(notes: Vec<Note>) -> NoteSpan {
        NoteSpan::new(96, notes)
    }

    #[test]
    fn eighth_notes_near_miss() {
        let eighths: Vec<Note> = (0..8).map(|i| Note::new(60, i * 12, 12)).collect();
        let control = Control::binned(MeasurementKind::HorizontalDensity, 2);
        let r = check_compliance(&span(eighths), &control, &[]);
        assert_eq!(r.observed_bin, Some(3));
        assert!(!r.success(0));
        assert!(r.success(1));
    }

    #[test]
    fn octave_copy_fails_dnoc() {
        let cello: Vec<Note> = [0, 24, 48, 72].into_iter().map(|o| Note::new(48, o, 12)).collect();
        let viola: Vec<Note> = cello.iter().map(|n| Note { pitch: 60, ..*n }).collect();
        let violin: Vec<Note> = cello.iter().map(|n| Note { pitch: 72, ..*n }).collect();
        let ctx = vec![chromagram(&cello), chromagram(&viola)];
        assert!(!check_compliance(&span(violin.clone()), &Control::Dnoc, &ctx).satisfied);
        let shifted: Vec<Note> = violin.iter().map(|n| Note { pitch: 74, ..*n }).collect();
        assert!(check_compliance(&span(shifted), &Control::Dnoc, &ctx).satisfied);
    }

    #[test]
    fn undefined_measurement_unsatisfied() {
        let r = check_compliance(&span(vec![]), &Control::binned(MeasurementKind::VerticalDensity, 0), &[]);
        assert!(!r.satisfied && !r.satisfied_within_one_bin);
        assert_eq!(r.reason.as_deref(), Some("undefined"));
        assert!(check_compliance_token(&span(vec![]), Token::EndOfTarget, &[]).is_err());
    }

    #[test]
    fn success_report_schema_and_rates() {
        let ok = ComplianceResult {
            control: "<vert:0>".into(),
            observed: Some(1.0),
            target_bin: Some(0),
            observed_bin: Some(0),
            satisfied: true,
            satisfied_within_one_bin: true,
            reason: None,
        };
        let near = ComplianceResult {
            satisfied: false,
            observed_bin: Some(1),
            ..ok.clone()
        };
        let sample = |supplied, result: &ComplianceResult| ComplianceSample {
            token: "<vert:0>".into(),
            supplied,
            result: result.clone(),
        };
        let samples = vec![sample(true, &ok), sample(true, &near), sample(false, &near)];
        let rows = success_rate_report(&samples, 0).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].success_rate, Some(0.5));
        assert_eq!(rows[0].baseline_rate, Some(0.0));
        assert_eq!(rows[0].success_rate_within_one, Some(1.0));
        let csv = success_rate_csv(&rows);
        assert_eq!(csv.lines().next().unwrap(), SUCCESS_CSV_HEADER);
        assert_eq!(csv.lines().nth(1).unwrap(), "<vert:0>,0,2,1,0.500000,0.000000,0.500000,1.000000,0.000000,1.000000");
        assert!(success_rate_report(&samples, 2).is_err());
    }
}
