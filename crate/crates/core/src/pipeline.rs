//! Stage-by-stage orchestration through files.
//!
//! Each stage reads its inputs from, and writes its outputs to, the
//! configured output directory unless explicit paths are given. Outputs are
//! deterministic for a given config and inputs; wall-clock times and call
//! counts go into `*.meta.json` sidecars next to the file they describe.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::corpus::{
    load_corpus, sample_random, save_corpus, spike_controls, CorpusError, CorpusSample, WorkRecord,
};
use crate::evaluator::{
    evaluate_batch, BatchOptions, BiasMarker, CompletionProvider, DatasetError, DatasetMetadata,
    EvalError, EvaluationDataset, Exemplar, HttpProvider, HttpProviderConfig, MockProvider,
    PromptError, PromptScenario, ProviderError, Rubric, ScenarioKind, ScoringMode, Source,
};
use crate::openalex::{
    filter_works, IngestError, QuerySpec, TopicWhitelist, WorksClient, MAX_PAGE_SIZE,
    OPENALEX_WORKS_URL,
};
use crate::ranking::{
    feature_rows, fit_logistic, rank_table, summarize, FitOptions, RankError, RankedList,
    WeightVector, DEFAULT_Q1_THRESHOLD, DEFAULT_RIDGE_LAMBDA,
};
use crate::reporting::{
    export_correlation, export_json, export_keywords, export_kappa_grid, export_mean_scores,
    export_rank_curve, keyword_frequency, KeywordReport, ReportError,
};
use crate::retry::RetryPolicy;
use crate::stats::{agreement_report, mean_scores, AgreementReport, MeanScoreTable, StatsError};
use crate::survey::{ingest_survey, SurveyError};
use crate::synthetic::{write_synthetic, SyntheticError, SyntheticSpec, CONTROL_BOOSTED, CONTROL_MARKER};

pub const CONFIG_FILE: &str = "climscan.toml";
pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const SAMPLE_FILE: &str = "sample.jsonl";
pub const WEIGHTS_FILE: &str = "weights.json";
pub const RANKED_FILE: &str = "ranked.csv";
pub const RANK_SUMMARY_FILE: &str = "rank_summary.txt";
pub const KEYWORDS_FILE: &str = "keywords.csv";
pub const RANK_CURVE_FILE: &str = "rank_curve.csv";
pub const AGREEMENT_FILE: &str = "agreement.json";
pub const KAPPA_FILE: &str = "kappa.csv";
pub const CORRELATION_FILE: &str = "correlation.csv";

/// `scores_<source>_<mode>.csv`.
pub fn dataset_file_name(source: Source, mode: ScoringMode) -> String {
    format!("scores_{source}_{mode}.csv")
}

/// `dir/name.ext` → `dir/name.meta.json`.
pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

/// Which model answers the rubric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderSettings {
    /// Offline deterministic provider. `seed` defaults to the pipeline seed.
    Mock {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default)]
        markers: Vec<BiasMarker>,
    },
    /// Chat-completions endpoint; the key is read from the environment.
    Http(HttpProviderConfig),
}

impl Default for ProviderSettings {
    fn default() -> Self {
        ProviderSettings::Mock {
            seed: None,
            markers: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub runs: u32,
    pub q1_threshold: f64,
    pub ridge_lambda: f64,
    pub scenario: ScenarioKind,
    pub mode: ScoringMode,
    pub output_dir: PathBuf,
    /// Directory of recorded works pages; when set, nothing is fetched over
    /// the network.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixture_dir: Option<PathBuf>,
    pub openalex_endpoint: String,
    pub page_size: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_pages: Option<usize>,
    pub max_retries: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topic_whitelist_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub controls_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exemplars_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rubric_path: Option<PathBuf>,
    pub n_random: usize,
    pub concurrency: usize,
    pub keyword_top_n: usize,
    pub query: QuerySpec,
    pub provider: ProviderSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            runs: 6,
            q1_threshold: DEFAULT_Q1_THRESHOLD,
            ridge_lambda: DEFAULT_RIDGE_LAMBDA,
            scenario: ScenarioKind::Context,
            mode: ScoringMode::Binary,
            output_dir: PathBuf::from("climscan-out"),
            fixture_dir: None,
            openalex_endpoint: OPENALEX_WORKS_URL.into(),
            page_size: MAX_PAGE_SIZE,
            max_pages: None,
            max_retries: 5,
            topic_whitelist_path: None,
            controls_path: None,
            exemplars_path: None,
            rubric_path: None,
            n_random: 95,
            concurrency: 4,
            keyword_top_n: 10,
            query: QuerySpec::uk_climate_default(),
            provider: ProviderSettings::default(),
        }
    }
}

impl PipelineConfig {
    /// Reads a TOML config. Relative paths are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_toml(&text, base)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut config: PipelineConfig =
            toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.resolve_paths(base_dir);
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut self.output_dir);
        for p in [
            &mut self.fixture_dir,
            &mut self.topic_whitelist_path,
            &mut self.controls_path,
            &mut self.exemplars_path,
            &mut self.rubric_path,
        ]
        .into_iter()
        .flatten()
        {
            resolve(p);
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.q1_threshold) {
            return bad(format!("q1_threshold {} outside [0, 1]", self.q1_threshold));
        }
        if !self.ridge_lambda.is_finite() || self.ridge_lambda < 0.0 {
            return bad(format!("ridge_lambda {} must be non-negative", self.ridge_lambda));
        }
        if !(1..=MAX_PAGE_SIZE).contains(&self.page_size) {
            return bad(format!("page_size {} outside [1, {MAX_PAGE_SIZE}]", self.page_size));
        }
        if self.concurrency == 0 {
            return bad("concurrency must be at least 1".into());
        }
        if self.keyword_top_n == 0 {
            return bad("keyword_top_n must be at least 1".into());
        }
        self.query.validate()?;
        Ok(())
    }

    /// `name` inside the output directory.
    pub fn path(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.path(&dataset_file_name(self.scenario.source(), self.mode))
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            ..RetryPolicy::default()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Evaluation(#[from] EvalError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Survey(#[from] SurveyError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Ranking(#[from] RankError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Process exit status for this class of error.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Ingest(_) => 3,
            PipelineError::Corpus(_) => 4,
            PipelineError::Prompt(_) => 5,
            PipelineError::Provider(_) => 6,
            PipelineError::Evaluation(_) => 7,
            PipelineError::Dataset(_) => 8,
            PipelineError::Survey(_) => 9,
            PipelineError::Stats(_) => 10,
            PipelineError::Ranking(_) => 11,
            PipelineError::Report(_) => 12,
            PipelineError::Io { .. } => 13,
        }
    }
}

impl From<SyntheticError> for PipelineError {
    fn from(e: SyntheticError) -> Self {
        match e {
            SyntheticError::Ingest(e) => e.into(),
            SyntheticError::Corpus(e) => e.into(),
            SyntheticError::Io { path, source } => PipelineError::Io { path, source },
        }
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn write_meta(path: &Path, mut value: serde_json::Value) -> Result<(), PipelineError> {
    value["created_unix_seconds"] = unix_now().into();
    let meta = meta_path(path);
    let mut text = serde_json::to_string_pretty(&value).expect("json value serializes");
    text.push('\n');
    fs::write(&meta, text).map_err(|source| PipelineError::Io { path: meta, source })
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    let io = |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::write(path, text).map_err(io)
}

pub fn load_sample(path: &Path, seed: u64) -> Result<CorpusSample, PipelineError> {
    Ok(CorpusSample::from_records(load_corpus(path)?, seed)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchReport {
    pub fetched: usize,
    pub with_abstract: usize,
    pub retained: usize,
    pub pages: usize,
    pub retries: u32,
    pub corpus_path: PathBuf,
}

impl FetchReport {
    pub fn summary(&self) -> String {
        format!(
            "{} fetched, {} with abstracts, {} retained ({} pages, {} retries)",
            self.fetched, self.with_abstract, self.retained, self.pages, self.retries
        )
    }
}

/// Harvests works, keeps those with abstracts and in-scope topics, and
/// writes the corpus.
pub fn fetch(cfg: &PipelineConfig) -> Result<FetchReport, PipelineError> {
    let whitelist_path = cfg
        .topic_whitelist_path
        .as_ref()
        .ok_or_else(|| PipelineError::Config("topic_whitelist_path is required for fetch".into()))?;
    let whitelist = TopicWhitelist::load(whitelist_path)?;
    let client = match &cfg.fixture_dir {
        Some(dir) => WorksClient::fixture(dir),
        None => WorksClient::http(&cfg.openalex_endpoint, cfg.retry_policy())?,
    };
    let harvest = client.fetch_all(&cfg.query, cfg.page_size, cfg.max_pages)?;
    let with_abstract = harvest.works.iter().filter(|w| w.abstract_text().is_ok()).count();
    let records = filter_works(&harvest.works, &whitelist)
        .iter()
        .map(WorkRecord::from_raw)
        .collect::<Result<Vec<_>, _>>()?;
    if records.is_empty() {
        log::warn!("no works retained; the corpus is empty");
    }
    let corpus_path = cfg.path(CORPUS_FILE);
    save_corpus(&records, &corpus_path)?;
    let report = FetchReport {
        fetched: harvest.works.len(),
        with_abstract,
        retained: records.len(),
        pages: harvest.pages,
        retries: harvest.retries,
        corpus_path,
    };
    write_meta(
        &report.corpus_path,
        serde_json::json!({
            "source": cfg.fixture_dir.as_ref().map(|d| d.display().to_string()).unwrap_or(cfg.openalex_endpoint.clone()),
            "pages": report.pages,
            "retries": report.retries,
        }),
    )?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleReport {
    pub n_random: usize,
    pub n_controls: usize,
    pub sample_path: PathBuf,
}

/// Draws `n_random` works (default from config) from the corpus and spikes
/// in the first `n_controls` controls (default: all of them).
pub fn sample(
    cfg: &PipelineConfig,
    corpus_path: Option<&Path>,
    n_random: Option<usize>,
    n_controls: Option<usize>,
) -> Result<SampleReport, PipelineError> {
    let corpus = load_corpus(&corpus_path.map(Path::to_path_buf).unwrap_or_else(|| cfg.path(CORPUS_FILE)))?;
    let mut controls = match &cfg.controls_path {
        Some(path) => load_corpus(path)?,
        None if n_controls.unwrap_or(0) > 0 => {
            return Err(PipelineError::Config("controls requested but controls_path is not set".into()))
        }
        None => Vec::new(),
    };
    if let Some(n) = n_controls {
        if n > controls.len() {
            return Err(CorpusError::Size {
                requested: n,
                available: controls.len(),
            }
            .into());
        }
        controls.truncate(n);
    }
    let control_ids: HashSet<&str> = controls.iter().map(|c| c.work_id.as_str()).collect();
    let candidates: Vec<WorkRecord> = corpus
        .into_iter()
        .filter(|w| !control_ids.contains(w.work_id.as_str()))
        .collect();
    let n_random = n_random.unwrap_or(cfg.n_random);
    let random = sample_random(&candidates, n_random, cfg.seed)?;
    let spiked = spike_controls(random, controls, cfg.seed)?;
    let sample_path = cfg.path(SAMPLE_FILE);
    save_corpus(&spiked.records, &sample_path)?;
    Ok(SampleReport {
        n_random: spiked.n_random,
        n_controls: spiked.n_controls,
        sample_path,
    })
}

pub fn build_rubric(cfg: &PipelineConfig) -> Result<Rubric, PipelineError> {
    Ok(match &cfg.rubric_path {
        Some(path) => Rubric::load(path)?,
        None => Rubric::climate_default(),
    })
}

pub fn build_scenario(cfg: &PipelineConfig, rubric: &Rubric) -> Result<PromptScenario, PipelineError> {
    Ok(match cfg.scenario {
        ScenarioKind::NoShot => PromptScenario::no_shot(),
        ScenarioKind::Context => PromptScenario::context(rubric),
        ScenarioKind::FewShot => {
            let path = cfg.exemplars_path.as_ref().ok_or_else(|| {
                PipelineError::Config("few-shot scenario needs exemplars_path".into())
            })?;
            let exemplars = load_corpus(path)?.iter().map(Exemplar::from).collect();
            PromptScenario::few_shot(rubric, exemplars)
        }
    })
}

pub fn build_provider(cfg: &PipelineConfig) -> Result<Box<dyn CompletionProvider>, PipelineError> {
    Ok(match &cfg.provider {
        ProviderSettings::Mock { seed, markers } => {
            Box::new(MockProvider::new(seed.unwrap_or(cfg.seed), markers.clone()))
        }
        ProviderSettings::Http(http) => Box::new(HttpProvider::from_env(http, cfg.retry_policy())?),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateReport {
    pub records: usize,
    pub failures: usize,
    pub parse_retries: u32,
    pub calls: u64,
    pub dataset_path: PathBuf,
}

/// Scores the sample `runs` times with the configured provider.
pub fn evaluate(cfg: &PipelineConfig, sample_path: Option<&Path>) -> Result<EvaluateReport, PipelineError> {
    let sample = load_sample(&sample_path.map(Path::to_path_buf).unwrap_or_else(|| cfg.path(SAMPLE_FILE)), cfg.seed)?;
    let rubric = build_rubric(cfg)?;
    let scenario = build_scenario(cfg, &rubric)?;
    let provider = build_provider(cfg)?;
    let options = BatchOptions {
        concurrency: cfg.concurrency,
        ..BatchOptions::default()
    };
    let outcome = evaluate_batch(&sample, &scenario, cfg.mode, cfg.runs, provider.as_ref(), &rubric, &options)?;
    let dataset_path = cfg.dataset_path();
    outcome.dataset.save(&dataset_path)?;
    let meta = DatasetMetadata {
        created_unix_seconds: unix_now(),
        provider: provider.name(),
        calls: outcome.calls,
        parse_retries: outcome.total_retries(),
        failures: outcome.failures.len(),
    };
    let meta_file = meta_path(&dataset_path);
    meta.write(&meta_file)
        .map_err(|source| PipelineError::Io { path: meta_file, source })?;
    Ok(EvaluateReport {
        records: outcome.dataset.len(),
        failures: outcome.failures.len(),
        parse_retries: outcome.total_retries(),
        calls: outcome.calls,
        dataset_path,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurveyReport {
    pub records: usize,
    pub missing: usize,
    pub dataset_path: PathBuf,
}

/// Validates a survey CSV against the sample and stores it as a dataset.
pub fn ingest_survey_file(
    cfg: &PipelineConfig,
    survey_path: &Path,
    sample_path: Option<&Path>,
) -> Result<SurveyReport, PipelineError> {
    let sample = load_sample(&sample_path.map(Path::to_path_buf).unwrap_or_else(|| cfg.path(SAMPLE_FILE)), cfg.seed)?;
    let ingest = ingest_survey(survey_path, &sample)?;
    for m in &ingest.missing {
        log::warn!("no survey response from {} for {}", m.rater_id, m.work_id);
    }
    let dataset_path = cfg.path(&dataset_file_name(Source::Human, ScoringMode::Binary));
    ingest.dataset.save(&dataset_path)?;
    Ok(SurveyReport {
        records: ingest.dataset.len(),
        missing: ingest.missing.len(),
        dataset_path,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub tables: Vec<MeanScoreTable>,
    pub agreement: AgreementReport,
    pub files: Vec<PathBuf>,
}

/// Mean-score tables for every (file, source) in order; the first is the
/// reference panel for kappa.
pub fn stats(cfg: &PipelineConfig, datasets: &[PathBuf]) -> Result<StatsReport, PipelineError> {
    if datasets.is_empty() {
        return Err(PipelineError::Config("stats needs at least one dataset".into()));
    }
    let mut tables = Vec::new();
    for path in datasets {
        let dataset = EvaluationDataset::load(path)?;
        for source in dataset.sources() {
            tables.push(mean_scores(&dataset.for_source(source))?);
        }
    }
    let agreement = agreement_report(&tables)?;
    let mut files = Vec::new();
    for table in &tables {
        let path = cfg.path(&format!("means_{}.csv", table.label().replace('/', "_")));
        export_mean_scores(table, &path)?;
        files.push(path);
    }
    let kappa_path = cfg.path(KAPPA_FILE);
    export_kappa_grid(&agreement, &kappa_path)?;
    let correlation_path = cfg.path(CORRELATION_FILE);
    export_correlation(&agreement.correlation, &correlation_path)?;
    let agreement_path = cfg.path(AGREEMENT_FILE);
    export_json(&agreement, &agreement_path)?;
    files.extend([kappa_path, correlation_path, agreement_path]);
    Ok(StatsReport {
        tables,
        agreement,
        files,
    })
}

/// Fits ranking weights on one panel's mean scores, labelling the sample's
/// controls as positives.
pub fn train(
    cfg: &PipelineConfig,
    dataset_path: Option<&Path>,
    sample_path: Option<&Path>,
) -> Result<WeightVector, PipelineError> {
    let dataset = EvaluationDataset::load(&dataset_path.map(Path::to_path_buf).unwrap_or_else(|| cfg.dataset_path()))?;
    let sample = load_sample(&sample_path.map(Path::to_path_buf).unwrap_or_else(|| cfg.path(SAMPLE_FILE)), cfg.seed)?;
    let table = mean_scores(&dataset)?;
    let rows = feature_rows(&table, &sample.control_ids());
    let weights = fit_logistic(&rows, cfg.ridge_lambda, FitOptions::default())?;
    weights.save(&cfg.path(WEIGHTS_FILE))?;
    Ok(weights)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub list: RankedList,
    pub n_works: usize,
    pub n_controls: usize,
    pub summary: String,
    pub ranked_path: PathBuf,
}

/// Filters on Q1, scores with the weights and writes the ranked list and a
/// plain-text summary.
pub fn rank(
    cfg: &PipelineConfig,
    dataset_path: Option<&Path>,
    weights_path: Option<&Path>,
    sample_path: Option<&Path>,
) -> Result<RankReport, PipelineError> {
    let dataset = EvaluationDataset::load(&dataset_path.map(Path::to_path_buf).unwrap_or_else(|| cfg.dataset_path()))?;
    let weights = WeightVector::load(&weights_path.map(Path::to_path_buf).unwrap_or_else(|| cfg.path(WEIGHTS_FILE)))?;
    let sample = load_sample(&sample_path.map(Path::to_path_buf).unwrap_or_else(|| cfg.path(SAMPLE_FILE)), cfg.seed)?;
    let table = mean_scores(&dataset)?;
    let list = rank_table(&table, &weights, cfg.q1_threshold, &sample.control_ids())?;
    let summary = summarize(&list, table.works.len(), sample.n_controls);
    let ranked_path = cfg.path(RANKED_FILE);
    list.save_csv(&ranked_path)?;
    write_text(&cfg.path(RANK_SUMMARY_FILE), &summary)?;
    Ok(RankReport {
        list,
        n_works: table.works.len(),
        n_controls: sample.n_controls,
        summary,
        ranked_path,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutput {
    pub keywords: KeywordReport,
    pub files: Vec<PathBuf>,
}

/// Keyword counts over the top of the ranked list plus the rank-score curve.
pub fn report(
    cfg: &PipelineConfig,
    ranked_path: Option<&Path>,
    sample_path: Option<&Path>,
    top_n: Option<usize>,
    include_controls: bool,
) -> Result<ReportOutput, PipelineError> {
    let list = RankedList::load_csv(&ranked_path.map(Path::to_path_buf).unwrap_or_else(|| cfg.path(RANKED_FILE)), cfg.q1_threshold)?;
    let sample = load_sample(&sample_path.map(Path::to_path_buf).unwrap_or_else(|| cfg.path(SAMPLE_FILE)), cfg.seed)?;
    let keywords = keyword_frequency(&list, &sample.records, top_n.unwrap_or(cfg.keyword_top_n), include_controls)?;
    let keywords_path = cfg.path(KEYWORDS_FILE);
    export_keywords(&keywords, &keywords_path)?;
    let curve_path = cfg.path(RANK_CURVE_FILE);
    export_rank_curve(&list, &curve_path)?;
    Ok(ReportOutput {
        keywords,
        files: vec![keywords_path, curve_path],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub fetch: FetchReport,
    pub sample: SampleReport,
    pub evaluate: EvaluateReport,
    pub weights: WeightVector,
    pub rank: RankReport,
    pub report: ReportOutput,
}

/// fetch → sample → evaluate → train → rank → report with default paths.
pub fn run_all(cfg: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    let fetch = fetch(cfg)?;
    log::info!("{}", fetch.summary());
    let sample = sample(cfg, None, None, None)?;
    let evaluate = evaluate(cfg, None)?;
    let weights = train(cfg, None, None)?;
    let rank = rank(cfg, None, None, None)?;
    let report = report(cfg, None, None, None, false)?;
    Ok(RunSummary {
        fetch,
        sample,
        evaluate,
        weights,
        rank,
        report,
    })
}

/// Writes a synthetic offline corpus under `dir` together with a config
/// that runs the whole pipeline against it with a marker-aware mock.
/// Returns the config path.
pub fn write_demo(dir: &Path, spec: &SyntheticSpec, n_random: usize) -> Result<PathBuf, PipelineError> {
    let layout = write_synthetic(dir, spec)?;
    let relative = |p: &Path| p.strip_prefix(dir).map(Path::to_path_buf).unwrap_or_else(|_| p.to_path_buf());
    let cfg = PipelineConfig {
        seed: spec.seed,
        output_dir: PathBuf::from("out"),
        fixture_dir: Some(relative(&layout.pages_dir)),
        topic_whitelist_path: Some(relative(&layout.whitelist)),
        controls_path: Some(relative(&layout.controls)),
        exemplars_path: Some(relative(&layout.exemplars)),
        n_random,
        provider: ProviderSettings::Mock {
            seed: None,
            markers: vec![BiasMarker::new(CONTROL_MARKER, CONTROL_BOOSTED)],
        },
        ..PipelineConfig::default()
    };
    let path = dir.join(CONFIG_FILE);
    write_text(&path, &cfg.to_toml())?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_protocol() {
        let cfg = PipelineConfig::from_toml("", Path::new("/base")).unwrap();
        assert_eq!(cfg.runs, 6);
        assert_eq!(cfg.q1_threshold, 0.6);
        assert_eq!(cfg.ridge_lambda, 1e-3);
        assert_eq!(cfg.output_dir, Path::new("/base/climscan-out"));
        assert!(matches!(cfg.provider, ProviderSettings::Mock { .. }));
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = PipelineConfig {
            output_dir: "/tmp/out".into(),
            fixture_dir: Some("/tmp/pages".into()),
            provider: ProviderSettings::Mock {
                seed: Some(3),
                markers: vec![BiasMarker::new("x", [crate::Question::Q1])],
            },
            ..PipelineConfig::default()
        };
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml(), Path::new("/")).unwrap(), cfg);
    }

    #[test]
    fn http_provider_parses_and_api_key_is_not_a_field() {
        let text = "[provider]\nkind = \"http\"\nbase_url = \"http://localhost:1\"\n";
        let cfg = PipelineConfig::from_toml(text, Path::new("/")).unwrap();
        assert!(matches!(cfg.provider, ProviderSettings::Http(ref h) if h.api_key_env == "CLIMSCAN_API_KEY"));
        let with_key = format!("{text}api_key = \"sk-secret\"\n");
        assert!(PipelineConfig::from_toml(&with_key, Path::new("/")).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        for text in ["runs = 0", "q1_threshold = 1.5", "ridge_lambda = -1.0", "page_size = 500", "unknown = 1"] {
            let err = PipelineConfig::from_toml(text, Path::new("/")).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}");
        }
    }
}
