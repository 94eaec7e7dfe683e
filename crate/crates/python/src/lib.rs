//! Python bindings. Structured values cross the boundary as plain dicts and
//! lists with the same shape as the JSON files the command line writes.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use serde::de::DeserializeOwned;
use serde::Serialize;

use ::trackfill::analysis::analyze;
use ::trackfill::dataset::{
    build_dataset as core_build_dataset, load_corpus_dir, read_jsonl_file, write_jsonl_file, BuildOptions,
    DatasetConfig, InfillExample, Task,
};
use ::trackfill::metrics::{compliance_samples, evaluate as core_evaluate, success_rate_report, ComplyRecord, MatchPolicy};
use ::trackfill::midi::{load_midi, write_midi};
use ::trackfill::request::{self, MaskFile};
use ::trackfill::score::QuantizedScore;
use ::trackfill::synth::{synth_corpus as core_synth_corpus, SynthConfig};
use ::trackfill::tokens;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(value_err)
}

/// A quantized multi-track score.
#[pyclass(name = "Score", module = "trackfill", frozen)]
struct PyScore {
    inner: QuantizedScore,
}

#[pymethods]
impl PyScore {
    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        load_midi(data).map(|inner| PyScore { inner }).map_err(value_err)
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        let bytes = std::fs::read(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }

    #[getter]
    fn num_tracks(&self) -> usize {
        self.inner.tracks.len()
    }

    #[getter]
    fn num_measures(&self) -> usize {
        self.inner.num_measures()
    }

    #[getter]
    fn note_count(&self) -> usize {
        self.inner.note_count()
    }

    #[getter]
    fn measure_lengths(&self) -> Vec<u32> {
        self.inner.measure_map.lengths()
    }

    /// Track dicts with `instrument`, `name`, `is_drum` and `notes`.
    fn tracks<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.tracks)
    }

    #[pyo3(signature = (start=0, measures=None, per_measure=false))]
    fn analyze<'py>(
        &self,
        py: Python<'py>,
        start: usize,
        measures: Option<usize>,
        per_measure: bool,
    ) -> PyResult<Bound<'py, PyAny>> {
        let n = measures.unwrap_or_else(|| self.inner.num_measures().saturating_sub(start));
        let slice = self.inner.slice(start, n).map_err(value_err)?;
        to_py(py, &analyze(&slice, per_measure))
    }

    /// Encode under a mask specification dict (same schema as the JSON file).
    #[pyo3(signature = (spec=None))]
    fn tokenize<'py>(&self, py: Python<'py>, spec: Option<&Bound<'py, PyAny>>) -> PyResult<Bound<'py, PyAny>> {
        let spec: MaskFile = match spec {
            Some(s) => from_py(s)?,
            None => MaskFile::default(),
        };
        let out = request::tokenize(&self.inner, &spec).map_err(value_err)?;
        to_py(py, &out)
    }

    fn to_midi<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let bytes = write_midi(&self.inner).map_err(value_err)?;
        Ok(PyBytes::new(py, &bytes))
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        let bytes = write_midi(&self.inner).map_err(value_err)?;
        std::fs::write(&path, bytes).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))
    }

    fn __repr__(&self) -> String {
        format!(
            "Score(tracks={}, measures={}, notes={})",
            self.inner.tracks.len(),
            self.inner.num_measures(),
            self.inner.note_count()
        )
    }
}

/// Rebuild a score from prompt and target token text.
#[pyfunction]
fn detokenize(prompt_text: &str, target_text: &str) -> PyResult<PyScore> {
    request::detokenize(prompt_text, target_text)
        .map(|(inner, _)| PyScore { inner })
        .map_err(value_err)
}

#[pyfunction]
fn vocabulary() -> Vec<String> {
    tokens::vocabulary().iter().map(|t| t.to_string()).collect()
}

#[pyfunction]
fn vocabulary_fingerprint() -> String {
    tokens::vocabulary_fingerprint()
}

#[pyfunction]
fn text_to_ids(text: &str) -> PyResult<Vec<u32>> {
    tokens::parse_text(text).map(|t| tokens::to_ids(&t)).map_err(value_err)
}

#[pyfunction]
fn ids_to_text(ids: Vec<u32>) -> PyResult<String> {
    tokens::from_ids(&ids).map(|t| tokens::render_text(&t)).map_err(value_err)
}

/// Returns `(examples, manifest)`.
#[pyfunction]
#[pyo3(signature = (corpus_dir, task, n, seed=0, max_controls=false, jobs=1, config=None))]
#[allow(clippy::too_many_arguments)]
fn build_dataset<'py>(
    py: Python<'py>,
    corpus_dir: PathBuf,
    task: &str,
    n: usize,
    seed: u64,
    max_controls: bool,
    jobs: usize,
    config: Option<&Bound<'py, PyAny>>,
) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
    let task = Task::from_name(task).ok_or_else(|| PyValueError::new_err(format!("unknown task `{task}`")))?;
    let config: DatasetConfig = match config {
        Some(c) => from_py(c)?,
        None => DatasetConfig::default(),
    };
    config.validate().map_err(PyValueError::new_err)?;
    let files = load_corpus_dir(&corpus_dir).map_err(|e| PyIOError::new_err(format!("{}: {e}", corpus_dir.display())))?;
    let options = BuildOptions {
        task,
        n,
        seed,
        max_controls,
        jobs: jobs.max(1),
        config,
    };
    let (examples, manifest) = py.detach(|| core_build_dataset(&files, &options));
    Ok((to_py(py, &examples)?, to_py(py, &manifest)?))
}

#[pyfunction]
fn read_examples<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let examples: Vec<InfillExample> = read_jsonl_file(&path).map_err(value_err)?;
    to_py(py, &examples)
}

#[pyfunction]
fn write_examples(path: PathBuf, examples: &Bound<'_, PyAny>) -> PyResult<()> {
    let examples: Vec<InfillExample> = from_py(examples)?;
    write_jsonl_file(&path, &examples).map_err(|e| PyIOError::new_err(e.to_string()))
}

/// Score outputs (`{id: target_ids}`) against example dicts.
#[pyfunction]
#[pyo3(signature = (examples, outputs, match_duration=false))]
fn evaluate<'py>(
    py: Python<'py>,
    examples: &Bound<'py, PyAny>,
    outputs: BTreeMap<String, Vec<u32>>,
    match_duration: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let examples: Vec<InfillExample> = from_py(examples)?;
    let policy = if match_duration {
        MatchPolicy::PitchOnsetDuration
    } else {
        MatchPolicy::PitchOnset
    };
    let report = core_evaluate(&examples, &outputs, policy).map_err(value_err)?;
    to_py(py, &report)
}

/// Per-token success rates for a list of compliance records.
#[pyfunction]
#[pyo3(signature = (records, tolerance=0))]
fn comply<'py>(py: Python<'py>, records: &Bound<'py, PyAny>, tolerance: u8) -> PyResult<Bound<'py, PyAny>> {
    let records: Vec<ComplyRecord> = from_py(records)?;
    let mut samples = Vec::new();
    for r in &records {
        samples.extend(compliance_samples(r).map_err(PyValueError::new_err)?);
    }
    let rows = success_rate_report(&samples, tolerance).map_err(value_err)?;
    to_py(py, &rows)
}

/// Write a generated corpus into `out_dir`; returns the file names.
#[pyfunction]
#[pyo3(signature = (out_dir, count, seed=0))]
fn synth_corpus(out_dir: PathBuf, count: usize, seed: u64) -> PyResult<Vec<String>> {
    std::fs::create_dir_all(&out_dir).map_err(|e| PyIOError::new_err(e.to_string()))?;
    let files = core_synth_corpus(count, seed, &SynthConfig::default());
    for f in &files {
        std::fs::write(out_dir.join(&f.source), &f.bytes).map_err(|e| PyIOError::new_err(e.to_string()))?;
    }
    Ok(files.into_iter().map(|f| f.source).collect())
}

#[pymodule(name = "trackfill")]
fn trackfill_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("VOCAB_SIZE", tokens::VOCAB_SIZE)?;
    m.add_class::<PyScore>()?;
    m.add_function(wrap_pyfunction!(detokenize, m)?)?;
    m.add_function(wrap_pyfunction!(vocabulary, m)?)?;
    m.add_function(wrap_pyfunction!(vocabulary_fingerprint, m)?)?;
    m.add_function(wrap_pyfunction!(text_to_ids, m)?)?;
    m.add_function(wrap_pyfunction!(ids_to_text, m)?)?;
    m.add_function(wrap_pyfunction!(build_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(read_examples, m)?)?;
    m.add_function(wrap_pyfunction!(write_examples, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(comply, m)?)?;
    m.add_function(wrap_pyfunction!(synth_corpus, m)?)?;
    Ok(())
}
