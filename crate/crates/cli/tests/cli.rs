use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trackfill"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn trackfill")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().unwrap_or("")).unwrap_or_else(|e| panic!("{e}: {text}"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const PLAIN_PROMPT: &str = "<inst:0> <mlen:96> <pos:0> <non:60> <dur:24> <pos:24> <non:64> <dur:24> \
<pos:48> <non:67> <dur:48> <sep> <mlen:96> <pos:0> <non:67> <dur:96> <non:64> <dur:96> <non:60> <dur:96> \
<inst:33> <mlen:96> <pos:0> <non:36> <dur:96> <sep> <mlen:96> <pos:0> <non:36> <dur:96>";

const MASKED_PROMPT: &str = "<inst:0> <mlen:96> <pos:0> <non:60> <dur:24> <pos:24> <non:64> <dur:24> \
<pos:48> <non:67> <dur:48> <sep> <mlen:96> <mask:0> <vert:2> <pos:0> <mp2:3:3> <dur:96> \
<inst:33> <mlen:96> <pos:0> <non:36> <dur:96> <sep> <mlen:96> <pos:0> <non:36> <dur:96> <track:0> <pcs:2>";

const MASKED_TARGET: &str = "<fill:0> <pos:0> <non:67> <dur:96> <non:64> <dur:96> <non:60> <dur:96> <eot>";

const MASK_SPEC: &str = r#"{
  "masks": [{"track": 0, "measure": 1, "conditioning": "2d"}],
  "cell_controls": [{"track": 0, "measure": 1, "controls": ["vert"]}],
  "track_controls": [{"track": 0, "controls": ["pcs"]}]
}"#;

#[test]
fn vocab_size_and_fingerprint() {
    let out = run(&["vocab", "--json"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["size"], 1706);
    assert_eq!(v["tokens"].as_array().unwrap().len(), 1706);
    assert_eq!(v["tokens"][0], "<inst:0>");
    assert_eq!(v["fingerprint"], trackfill::tokens::vocabulary_fingerprint());

    let text = run(&["vocab"]);
    let lines: Vec<String> = String::from_utf8(text.stdout).unwrap().lines().map(String::from).collect();
    assert_eq!(lines.len(), 1706);
    assert_eq!(lines[1705], "1705\t<mp2:8:8>");
}

#[test]
fn tokenize_golden_unmasked() {
    let out = run(&["tokenize", s(&fixture("two_tracks.mid"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["prompt_text"], PLAIN_PROMPT);
    assert_eq!(v["target_text"], "<eot>");
    assert_eq!(v["measure_lengths"], serde_json::json!([96, 96]));
    assert_eq!(v["num_tracks"], 2);
}

#[test]
fn tokenize_detokenize_golden_masked() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(&spec, MASK_SPEC).unwrap();
    let out = run(&["tokenize", s(&fixture("two_tracks.mid")), "--masks", s(&spec)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["prompt_text"], MASKED_PROMPT);
    assert_eq!(v["target_text"], MASKED_TARGET);

    let tokenized = dir.path().join("tok.json");
    fs::write(&tokenized, &out.stdout).unwrap();
    let midi = dir.path().join("back.mid");
    let out = run(&["detokenize", "--tokenized", s(&tokenized), "--out", s(&midi)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["notes"], 8);

    // same notes and measurements as the source file; track names are not tokenized
    let a = stdout_json(&run(&["analyze", s(&fixture("two_tracks.mid"))]));
    let b = stdout_json(&run(&["analyze", s(&midi)]));
    for t in 0..2 {
        for key in ["instrument", "note_count", "measurements", "pitch_range", "dnoc_flags"] {
            assert_eq!(a["tracks"][t][key], b["tracks"][t][key], "track {t} {key}");
        }
    }
}

#[test]
fn detokenize_from_text_files() {
    let dir = tempfile::tempdir().unwrap();
    let (p, t, midi) = (dir.path().join("p.txt"), dir.path().join("t.txt"), dir.path().join("o.mid"));
    fs::write(&p, MASKED_PROMPT).unwrap();
    fs::write(&t, MASKED_TARGET).unwrap();
    let out = run(&["detokenize", "--prompt", s(&p), "--target", s(&t), "--out", s(&midi)]);
    assert!(out.status.success());
    assert!(midi.is_file());
}

#[test]
fn detokenize_grammar_error_reports_offset() {
    let dir = tempfile::tempdir().unwrap();
    let (p, t) = (dir.path().join("p.txt"), dir.path().join("t.txt"));
    fs::write(&p, MASKED_PROMPT).unwrap();
    fs::write(&t, "<fill:0> <pos:0> <dur:96>").unwrap();
    let out = run(&["detokenize", "--prompt", s(&p), "--target", s(&t), "--out", s(&dir.path().join("o.mid"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["kind"], "grammar");
    assert_eq!(err["details"]["sequence"], "target");
    assert_eq!(err["details"]["offset"], 2);
    assert!(!dir.path().join("o.mid").exists());
}

#[test]
fn analyze_reports_six_measurements_and_rejects_bad_input() {
    let out = run(&["analyze", s(&fixture("two_tracks.mid")), "--per-measure"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    let piano = &v["tracks"][0];
    assert_eq!(piano["measurements"].as_object().unwrap().len(), 6);
    assert_eq!(piano["measurements"]["vertical_density"]["value"], 1.5);
    assert_eq!(piano["pitch_range"], serde_json::json!({"low": 60, "high": 67}));
    assert_eq!(piano["per_measure"][1]["measurements"]["vertical_density"]["bin"], 2);
    let bass = &v["tracks"][1];
    assert_eq!(bass["measurements"]["vertical_density"]["bin"], 0);
    assert_eq!(bass["measurements"]["step_propensity"]["value"], 0.0);

    let missing = run(&["analyze", "/nonexistent/file.mid"]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(stderr_json(&missing)["kind"], "io");

    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.mid");
    fs::write(&junk, b"not a midi file").unwrap();
    let bad = run(&["analyze", s(&junk)]);
    assert_eq!(bad.status.code(), Some(2));
    assert_eq!(stderr_json(&bad)["kind"], "midi");
}

#[test]
fn unknown_control_in_mask_spec_fails() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(&spec, r#"{"track_controls": [{"track": 0, "controls": ["tempo"]}]}"#).unwrap();
    let out = run(&["tokenize", s(&fixture("two_tracks.mid")), "--masks", s(&spec)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["kind"], "mask_spec");
}

fn synth(dir: &Path, count: &str) -> PathBuf {
    let corpus = dir.join("corpus");
    let out = run(&["synth", s(&corpus), "--count", count, "--seed", "7"]);
    assert!(out.status.success());
    corpus
}

#[test]
fn dataset_eval_comply_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "12");
    let examples = dir.path().join("random.jsonl");
    let out = run(&[
        "make-dataset", s(&corpus), "--task", "random", "--n", "20", "--max-controls", "--out", s(&examples), "--seed", "3",
    ]);
    assert!(matches!(out.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    let n = summary["examples"].as_u64().unwrap() as usize;
    assert!(n > 0 && n <= 20);
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("random.jsonl.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["task"], "random");
    assert_eq!(manifest["seed"], 3);

    // oracle outputs: the ground-truth targets themselves
    let text = fs::read_to_string(&examples).unwrap();
    let records: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), n);
    let outputs = dir.path().join("outputs.jsonl");
    let lines: Vec<String> = records
        .iter()
        .map(|r| serde_json::json!({"id": r["id"], "target_ids": r["target_ids"]}).to_string())
        .collect();
    fs::write(&outputs, lines.join("\n") + "\n").unwrap();

    let report_dir = dir.path().join("report");
    let out = run(&["eval", s(&examples), s(&outputs), "--out-dir", s(&report_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let agg = stdout_json(&out);
    assert_eq!(agg["f1"], 100.0);
    assert_eq!(agg["groove_similarity"], 100.0);
    assert_eq!(agg["entropy_difference"], 0.0);
    let csv = fs::read_to_string(report_dir.join("eval.csv")).unwrap();
    assert!(csv.starts_with("id,task,status,true_positives,"));
    assert_eq!(csv.lines().count(), n + 2);
    assert!(report_dir.join("eval.json").is_file());

    // drop one output
    let partial = dir.path().join("partial.jsonl");
    fs::write(&partial, lines[1..].join("\n")).unwrap();
    let out = run(&["eval", s(&examples), s(&partial), "--out-dir", s(&report_dir)]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["kind"], "missing_outputs");
    assert_eq!(err["details"][0], records[0]["id"]);

    let comply_in = dir.path().join("comply.jsonl");
    let lines: Vec<String> = records
        .iter()
        .map(|r| serde_json::json!({"id": r["id"], "prompt_text": r["prompt_text"], "target_ids": r["target_ids"]}).to_string())
        .collect();
    fs::write(&comply_in, lines.join("\n")).unwrap();
    let out = run(&["comply", s(&comply_in), "--tolerance", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("token,tolerance,n_conditioned,"));
    assert!(csv.lines().count() > 1);

    let bad = run(&["comply", s(&comply_in), "--tolerance", "2"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn make_dataset_is_deterministic_across_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "10");
    let mut outputs = Vec::new();
    for jobs in ["1", "4"] {
        let out = dir.path().join(format!("track-{jobs}.jsonl"));
        let status = run(&[
            "make-dataset", s(&corpus), "--task", "track", "--n", "50", "--out", s(&out), "--jobs", jobs, "--seed", "11",
        ]);
        assert!(matches!(status.status.code(), Some(0 | 1)));
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn make_dataset_empty_corpus_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "make-dataset", s(dir.path()), "--task", "lastbar", "--out", s(&dir.path().join("x.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["kind"], "empty_dataset");

    let missing = run(&["make-dataset", "/nonexistent", "--task", "train", "--out", "x.jsonl"]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(stderr_json(&missing)["kind"], "io");
}

#[test]
fn analyze_matches_library() {
    let bytes = fs::read(fixture("two_tracks.mid")).unwrap();
    let score = trackfill::midi::load_midi(&bytes).unwrap();
    let direct = serde_json::to_value(trackfill::analysis::analyze(&score.full_slice(), true)).unwrap();
    let out = run(&["analyze", s(&fixture("two_tracks.mid")), "--per-measure"]);
    assert_eq!(stdout_json(&out), direct);
}

#[test]
fn unmasked_round_trip_and_bad_spelling() {
    let dir = tempfile::tempdir().unwrap();
    let tok = dir.path().join("tok.json");
    let out = run(&["tokenize", s(&fixture("two_tracks.mid"))]);
    fs::write(&tok, &out.stdout).unwrap();
    let midi = dir.path().join("same.mid");
    assert!(run(&["detokenize", "--tokenized", s(&tok), "--out", s(&midi)]).status.success());
    let again = run(&["tokenize", s(&midi)]);
    assert_eq!(stdout_json(&again)["prompt_text"], PLAIN_PROMPT);

    let (p, t) = (dir.path().join("p.txt"), dir.path().join("t.txt"));
    fs::write(&p, PLAIN_PROMPT.replace("<non:64>", "<note:64>")).unwrap();
    fs::write(&t, "<eot>").unwrap();
    let out = run(&["detokenize", "--prompt", s(&p), "--target", s(&t), "--out", s(&midi)]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!((err["kind"].as_str(), err["details"]["offset"].as_u64()), (Some("grammar"), Some(6)));
}

fn read_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

#[test]
fn eval_empty_outputs_and_aggregate_means() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "8");
    let examples = dir.path().join("track.jsonl");
    let a = run(&["make-dataset", s(&corpus), "--task", "track", "--n", "15", "--out", s(&examples), "--seed", "5"]);
    assert!(matches!(a.status.code(), Some(0 | 1)));
    let first = fs::read(&examples).unwrap();
    let b = run(&["make-dataset", s(&corpus), "--task", "track", "--n", "15", "--out", s(&examples), "--seed", "5"]);
    assert_eq!(a.status.code(), b.status.code());
    assert_eq!(fs::read(&examples).unwrap(), first, "same seed, same bytes");

    let ids: Vec<String> = String::from_utf8(first)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["id"].as_str().unwrap().to_string())
        .collect();
    let outputs = dir.path().join("empty.jsonl");
    let lines: Vec<String> = ids.iter().map(|id| serde_json::json!({"id": id, "target_text": "<eot>"}).to_string()).collect();
    fs::write(&outputs, lines.join("\n")).unwrap();
    let report = dir.path().join("report");
    let out = run(&["eval", s(&examples), s(&outputs), "--out-dir", s(&report)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let (header, rows) = read_csv(&fs::read_to_string(report.join("eval.csv")).unwrap());
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (body, mean) = rows.split_at(rows.len() - 1);
    assert_eq!(mean[0][0], "mean");
    assert_eq!(body.len(), ids.len());
    for r in body {
        assert_eq!(r[col("recall")].parse::<f64>().unwrap(), 0.0);
    }
    for name in ["precision", "recall", "f1", "entropy_difference", "groove_similarity"] {
        let values: Vec<f64> = body.iter().map(|r| r[col(name)].parse().unwrap()).collect();
        let recomputed = values.iter().sum::<f64>() / values.len() as f64;
        let reported: f64 = mean[0][col(name)].parse().unwrap();
        assert!((recomputed - reported).abs() < 1e-4, "{name}: {recomputed} vs {reported}");
    }
}

#[test]
fn comply_success_rates_on_constructed_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"masks": [{"track": 0, "measure": 1}, {"track": 1, "measure": 1}],
            "cell_controls": [{"track": 0, "measure": 1, "controls": ["vert"]},
                              {"track": 1, "measure": 1, "controls": ["dnoc"]}]}"#,
    )
    .unwrap();
    let out = run(&["tokenize", s(&fixture("two_tracks.mid")), "--masks", s(&spec)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let prompt = stdout_json(&out)["prompt_text"].as_str().unwrap().to_string();
    assert!(prompt.contains("<mask:0> <vert:2>") && prompt.contains("<mask:1> <dnoc>"));

    let chord = "<non:67> <dur:96> <non:64> <dur:96> <non:60> <dur:96>";
    let targets = [
        // three-note chord and a bass note: both satisfied
        format!("<fill:0> <pos:0> {chord} <fill:1> <pos:0> <non:36> <dur:96> <eot>"),
        // two-note chord is one bin low; bass doubles the chord an octave down
        "<fill:0> <pos:0> <non:67> <dur:96> <non:60> <dur:96> <fill:1> <pos:0> <non:55> <dur:96> <non:48> <dur:96> <eot>".to_string(),
        // single notes: two bins low
        "<fill:0> <pos:0> <non:60> <dur:96> <fill:1> <pos:0> <non:38> <dur:96> <eot>".to_string(),
    ];
    let records = dir.path().join("comply.jsonl");
    let lines: Vec<String> = targets
        .iter()
        .enumerate()
        .map(|(i, t)| serde_json::json!({"id": format!("c{i}"), "prompt_text": prompt, "target_text": t}).to_string())
        .collect();
    fs::write(&records, lines.join("\n")).unwrap();

    let rate = |tolerance: &str| {
        let out = run(&["comply", s(&records), "--tolerance", tolerance]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let (header, rows) = read_csv(&String::from_utf8(out.stdout).unwrap());
        let col = |name: &str| header.iter().position(|h| h == name).unwrap();
        let get = |token: &str| {
            let row = rows.iter().find(|r| r[0] == token).unwrap();
            (row[col("n_conditioned")].parse::<usize>().unwrap(), row[col("success_rate")].parse::<f64>().unwrap())
        };
        (get("<vert:2>"), get("<dnoc>"))
    };
    let (vert, dnoc) = rate("0");
    assert_eq!(vert.0, 3);
    assert!((vert.1 - 1.0 / 3.0).abs() < 1e-6);
    assert_eq!(dnoc.0, 3);
    assert!((dnoc.1 - 2.0 / 3.0).abs() < 1e-6);
    let (vert, _) = rate("1");
    assert!((vert.1 - 2.0 / 3.0).abs() < 1e-6);
}
