//! Python bindings: abstract reconstruction, agreement statistics, weight
//! fitting and ranking, prompt building and response parsing, corpus files,
//! and the offline demo pipeline.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use climscan_core::corpus::{self, RecordSource};
use climscan_core::evaluator::{self, Exemplar, PromptScenario, Rubric, ScenarioKind, ScoringMode, Source};
use climscan_core::openalex::{self, QuerySpec, WorkType};
use climscan_core::pipeline::{self, PipelineConfig};
use climscan_core::ranking::{self, FeatureRow, FitOptions};
use climscan_core::stats::{self, MeanScoreTable};
use climscan_core::synthetic::SyntheticSpec;
use climscan_core::Question;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(climscan_py, ClimscanError, PyException);

fn err(e: impl Display) -> PyErr {
    ClimscanError::new_err(e.to_string())
}

fn parse<T: FromStr>(s: &str) -> PyResult<T>
where
    T::Err: Display,
{
    s.parse().map_err(err)
}

fn by_question(map: BTreeMap<String, f64>) -> PyResult<BTreeMap<Question, f64>> {
    map.into_iter().map(|(k, v)| Ok((parse::<Question>(&k)?, v))).collect()
}

fn by_key(map: &BTreeMap<Question, f64>) -> BTreeMap<String, f64> {
    map.iter().map(|(q, v)| (q.to_string(), *v)).collect()
}

#[pyclass(name = "WorkRecord", module = "climscan_py", get_all, frozen, from_py_object)]
#[derive(Clone)]
struct PyWorkRecord {
    work_id: String,
    title: String,
    abstract_text: String,
    publication_year: i32,
    topics: Vec<String>,
    keywords: Vec<String>,
    is_control: bool,
}

#[pymethods]
impl PyWorkRecord {
    #[new]
    #[pyo3(signature = (work_id, title, abstract_text, publication_year=2020, topics=vec![], keywords=vec![], is_control=false))]
    fn new(
        work_id: String,
        title: String,
        abstract_text: String,
        publication_year: i32,
        topics: Vec<String>,
        keywords: Vec<String>,
        is_control: bool,
    ) -> PyResult<Self> {
        let record = Self {
            work_id,
            title,
            abstract_text,
            publication_year,
            topics,
            keywords,
            is_control,
        };
        record.to_core().validate().map_err(err)?;
        Ok(record)
    }

    fn __repr__(&self) -> String {
        format!("WorkRecord({:?}, control={})", self.work_id, self.is_control)
    }
}

impl PyWorkRecord {
    fn to_core(&self) -> corpus::WorkRecord {
        corpus::WorkRecord {
            work_id: self.work_id.clone(),
            title: self.title.clone(),
            abstract_text: self.abstract_text.clone(),
            publication_year: self.publication_year,
            topics: self.topics.clone(),
            keywords: self.keywords.clone(),
            is_control: self.is_control,
            source: if self.is_control {
                RecordSource::Control
            } else {
                RecordSource::Harvested
            },
        }
    }

    fn from_core(r: corpus::WorkRecord) -> Self {
        Self {
            work_id: r.work_id,
            title: r.title,
            abstract_text: r.abstract_text,
            publication_year: r.publication_year,
            topics: r.topics,
            keywords: r.keywords,
            is_control: r.is_control,
        }
    }
}

#[pyclass(name = "WeightVector", module = "climscan_py", frozen)]
struct PyWeightVector(ranking::WeightVector);

#[pymethods]
impl PyWeightVector {
    #[getter]
    fn beta0(&self) -> f64 {
        self.0.beta0
    }

    #[getter]
    fn beta(&self) -> BTreeMap<String, f64> {
        by_key(&self.0.beta)
    }

    /// Normalized weights; they sum to one.
    #[getter]
    fn weights(&self) -> BTreeMap<String, f64> {
        by_key(&self.0.weights)
    }

    #[getter]
    fn ridge_lambda(&self) -> f64 {
        self.0.ridge_lambda
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.0.iterations
    }

    #[getter]
    fn gradient_norm(&self) -> f64 {
        self.0.gradient_norm
    }

    fn probability(&self, features: BTreeMap<String, f64>) -> PyResult<f64> {
        Ok(self.0.probability(&by_question(features)?))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        ranking::WeightVector::load(&path).map(Self).map_err(err)
    }

    fn __repr__(&self) -> String {
        let w: Vec<String> = self.0.weights.iter().map(|(q, v)| format!("{q}={v:.3}")).collect();
        format!("WeightVector({})", w.join(", "))
    }
}

#[pyclass(name = "RankedEntry", module = "climscan_py", get_all, frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyRankedEntry {
    rank: usize,
    work_id: String,
    score: f64,
    tie_group: usize,
    is_control: bool,
}

#[pymethods]
impl PyRankedEntry {
    fn __repr__(&self) -> String {
        format!("RankedEntry({}, {:?}, {:.6})", self.rank, self.work_id, self.score)
    }
}

#[pyclass(name = "RankedList", module = "climscan_py", frozen)]
struct PyRankedList(ranking::RankedList);

#[pymethods]
impl PyRankedList {
    #[getter]
    fn entries(&self) -> Vec<PyRankedEntry> {
        self.0
            .entries
            .iter()
            .map(|e| PyRankedEntry {
                rank: e.rank,
                work_id: e.work_id.clone(),
                score: e.score,
                tie_group: e.tie_group,
                is_control: e.is_control,
            })
            .collect()
    }

    #[getter]
    fn control_positions(&self) -> Vec<usize> {
        self.0.control_positions.clone()
    }

    fn tied_pairs(&self) -> usize {
        self.0.tied_pairs()
    }

    fn top_tie_size(&self) -> usize {
        self.0.top_tie_size()
    }

    fn summary(&self, n_works: usize, n_controls: usize) -> String {
        ranking::summarize(&self.0, n_works, n_controls)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Rebuilds abstract text from an OpenAlex inverted index.
#[pyfunction]
fn reconstruct_abstract(index: BTreeMap<String, Vec<u32>>) -> PyResult<String> {
    openalex::reconstruct_abstract(&index).map_err(err)
}

#[pyfunction]
fn invert_abstract(text: &str) -> BTreeMap<String, Vec<u32>> {
    openalex::invert_abstract(text)
}

/// Works-endpoint query parameters. Omitted arguments take the defaults of
/// the UK climate harvest.
#[pyfunction]
#[pyo3(signature = (institution_ids=None, country_code=None, work_types=None, min_publication_year=None, excluded_domain_ids=None, corresponding_author_required=true, contact_email=None))]
fn build_query(
    institution_ids: Option<Vec<String>>,
    country_code: Option<String>,
    work_types: Option<Vec<String>>,
    min_publication_year: Option<i32>,
    excluded_domain_ids: Option<Vec<u32>>,
    corresponding_author_required: bool,
    contact_email: Option<String>,
) -> PyResult<BTreeMap<String, String>> {
    let mut spec = QuerySpec::uk_climate_default();
    if let Some(ids) = institution_ids {
        spec.institution_ids = ids;
    }
    if country_code.is_some() {
        spec.country_code = country_code;
    }
    if let Some(types) = work_types {
        spec.work_types = types
            .iter()
            .map(|t| {
                WorkType::ALL
                    .into_iter()
                    .find(|w| w.as_str() == t)
                    .ok_or_else(|| err(format!("unknown work type {t:?}")))
            })
            .collect::<PyResult<_>>()?;
    }
    if let Some(year) = min_publication_year {
        spec.min_publication_year = year;
    }
    if let Some(domains) = excluded_domain_ids {
        spec.excluded_domain_ids = domains.into_iter().collect();
    }
    spec.corresponding_author_required = corresponding_author_required;
    spec.contact_email = contact_email;
    openalex::build_query(&spec).map_err(err)
}

#[pyfunction]
fn cohens_kappa(a: Vec<u8>, b: Vec<u8>) -> PyResult<f64> {
    stats::cohens_kappa(&a, &b).map(|k| k.kappa).map_err(err)
}

/// `None` when either input is constant.
#[pyfunction]
fn pearson(x: Vec<f64>, y: Vec<f64>) -> PyResult<Option<f64>> {
    stats::pearson(&x, &y).map_err(err)
}

/// Fits weights from rows of six Q2..Q7 features and 0/1 labels.
#[pyfunction]
#[pyo3(signature = (features, labels, ridge_lambda=ranking::DEFAULT_RIDGE_LAMBDA, max_iter=500, tol=1e-8))]
fn fit_logistic(
    features: Vec<Vec<f64>>,
    labels: Vec<u8>,
    ridge_lambda: f64,
    max_iter: usize,
    tol: f64,
) -> PyResult<PyWeightVector> {
    if features.len() != labels.len() {
        return Err(err(format!("{} feature rows but {} labels", features.len(), labels.len())));
    }
    let rows = features
        .iter()
        .zip(&labels)
        .enumerate()
        .map(|(i, (f, &label))| {
            if f.len() != Question::FEATURES.len() {
                return Err(err(format!("row {i} has {} features, expected 6", f.len())));
            }
            Ok(FeatureRow {
                work_id: format!("row{i}"),
                features: Question::FEATURES.iter().copied().zip(f.iter().copied()).collect(),
                label,
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    ranking::fit_logistic(&rows, ridge_lambda, FitOptions { max_iter, tol })
        .map(PyWeightVector)
        .map_err(err)
}

#[pyfunction]
fn normalize_weights(beta: BTreeMap<String, f64>) -> PyResult<BTreeMap<String, f64>> {
    ranking::normalize_weights(&by_question(beta)?).map(|w| by_key(&w)).map_err(err)
}

#[pyfunction]
fn weighted_score(features: BTreeMap<String, f64>, weights: BTreeMap<String, f64>) -> PyResult<f64> {
    ranking::weighted_score(&by_question(features)?, &by_question(weights)?).map_err(err)
}

/// Works whose mean Q1 score reaches the threshold (inclusive).
#[pyfunction]
#[pyo3(signature = (q1_means, threshold=ranking::DEFAULT_Q1_THRESHOLD))]
fn q1_filter(q1_means: BTreeMap<String, f64>, threshold: f64) -> PyResult<Vec<String>> {
    let table = MeanScoreTable {
        source: Source::LlmContext,
        mode: ScoringMode::Binary,
        n_raters: 1,
        rater_counts: vec![1; q1_means.len()],
        means: q1_means.values().map(|&q1| [q1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).collect(),
        works: q1_means.into_keys().collect(),
    };
    ranking::q1_filter(&table, threshold).map(|s| s.into_iter().collect()).map_err(err)
}

/// Orders `passed` (default: every work) by weighted Q2..Q7 score.
#[pyfunction]
#[pyo3(signature = (features, weights, passed=None, controls=vec![], q1_threshold=ranking::DEFAULT_Q1_THRESHOLD))]
fn rank(
    features: BTreeMap<String, BTreeMap<String, f64>>,
    weights: BTreeMap<String, f64>,
    passed: Option<Vec<String>>,
    controls: Vec<String>,
    q1_threshold: f64,
) -> PyResult<PyRankedList> {
    let passed: BTreeSet<String> = match passed {
        Some(p) => p.into_iter().collect(),
        None => features.keys().cloned().collect(),
    };
    let features = features
        .into_iter()
        .map(|(w, f)| Ok((w, by_question(f)?)))
        .collect::<PyResult<BTreeMap<_, _>>>()?;
    let controls: HashSet<String> = controls.into_iter().collect();
    ranking::rank(&passed, &features, &by_question(weights)?, &controls, q1_threshold)
        .map(PyRankedList)
        .map_err(err)
}

/// Extracts the Q1..Q7 answers from a model reply.
#[pyfunction]
#[pyo3(signature = (raw, mode="binary"))]
fn parse_response(raw: &str, mode: &str) -> PyResult<Vec<u32>> {
    evaluator::parse_response(raw, parse(mode)?)
        .map(|s| s.values().iter().map(|&v| u32::from(v)).collect())
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (work, scenario="context", mode="binary", exemplars=vec![]))]
fn build_prompt(work: PyRef<'_, PyWorkRecord>, scenario: &str, mode: &str, exemplars: Vec<PyWorkRecord>) -> PyResult<String> {
    let rubric = Rubric::climate_default();
    let scenario = match parse::<ScenarioKind>(scenario)? {
        ScenarioKind::NoShot => PromptScenario::no_shot(),
        ScenarioKind::Context => PromptScenario::context(&rubric),
        ScenarioKind::FewShot => PromptScenario::few_shot(
            &rubric,
            exemplars.iter().map(|e| Exemplar::from(&e.to_core())).collect(),
        ),
    };
    evaluator::build_prompt(&work.to_core(), &scenario, parse(mode)?, &rubric)
        .map(|p| p.text)
        .map_err(err)
}

#[pyfunction]
fn load_corpus(path: PathBuf) -> PyResult<Vec<PyWorkRecord>> {
    corpus::load_corpus(&path)
        .map(|v| v.into_iter().map(PyWorkRecord::from_core).collect())
        .map_err(err)
}

#[pyfunction]
fn save_corpus(records: Vec<PyWorkRecord>, path: PathBuf) -> PyResult<usize> {
    let records: Vec<_> = records.iter().map(PyWorkRecord::to_core).collect();
    corpus::save_corpus(&records, &path).map_err(err)
}

/// Writes a synthetic corpus with marked controls under `dir` plus a config
/// that runs the pipeline on it offline. Returns the config path.
#[pyfunction]
#[pyo3(signature = (dir, n_eligible=95, n_controls=5, seed=42, n_random=None))]
fn write_demo(dir: PathBuf, n_eligible: usize, n_controls: usize, seed: u64, n_random: Option<usize>) -> PyResult<String> {
    let spec = SyntheticSpec::new(n_eligible, n_controls, seed);
    pipeline::write_demo(&dir, &spec, n_random.unwrap_or(n_eligible))
        .map(|p| p.display().to_string())
        .map_err(err)
}

/// Runs fetch through report for a config file; returns the ranking.
#[pyfunction]
#[pyo3(signature = (config_path, mode=None))]
fn run_pipeline(py: Python<'_>, config_path: PathBuf, mode: Option<&str>) -> PyResult<(String, PyRankedList)> {
    let mut cfg = PipelineConfig::load(&config_path).map_err(err)?;
    if let Some(m) = mode {
        cfg.mode = parse(m)?;
    }
    let summary = py.detach(|| pipeline::run_all(&cfg)).map_err(err)?;
    Ok((summary.rank.summary, PyRankedList(summary.rank.list)))
}

#[pymodule]
pub fn climscan_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ClimscanError", m.py().get_type::<ClimscanError>())?;
    m.add_class::<PyWorkRecord>()?;
    m.add_class::<PyWeightVector>()?;
    m.add_class::<PyRankedEntry>()?;
    m.add_class::<PyRankedList>()?;
    m.add_function(wrap_pyfunction!(reconstruct_abstract, m)?)?;
    m.add_function(wrap_pyfunction!(invert_abstract, m)?)?;
    m.add_function(wrap_pyfunction!(build_query, m)?)?;
    m.add_function(wrap_pyfunction!(cohens_kappa, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(fit_logistic, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_weights, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_score, m)?)?;
    m.add_function(wrap_pyfunction!(q1_filter, m)?)?;
    m.add_function(wrap_pyfunction!(rank, m)?)?;
    m.add_function(wrap_pyfunction!(parse_response, m)?)?;
    m.add_function(wrap_pyfunction!(build_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(load_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(save_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(write_demo, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
