use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};

use super::dataset::{DatasetError, EvaluationDataset, EvaluationRecord};
use super::parse::parse_response;
use super::prompt::{build_prompt, PromptError, PromptScenario, Rubric};
use super::provider::{CompletionProvider, CompletionRequest};
use super::ScoringMode;
use crate::corpus::CorpusSample;

/// Knobs for [`evaluate_batch`].
#[derive(Debug, Clone, PartialEq)]
pub struct BatchOptions {
    /// Provider calls in flight at once.
    pub concurrency: usize,
    /// Total attempts per (work, run) when replies fail to parse.
    pub max_parse_attempts: u32,
    /// Batch fails when more than this fraction of (work, run) cells fail.
    pub max_failure_fraction: f64,
    pub max_tokens: u32,
    #[doc(hidden)]
    pub temperature_override: Option<f64>,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            concurrency: 4,
            max_parse_attempts: 3,
            max_failure_fraction: 0.10,
            max_tokens: 256,
            temperature_override: None,
        }
    }
}

/// A (work, run) cell that produced no record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallFailure {
    pub work_id: String,
    pub run: u32,
    pub reason: String,
}

#[derive(Debug)]
pub struct BatchOutcome {
    pub dataset: EvaluationDataset,
    pub failures: Vec<CallFailure>,
    /// Parse retries per (work, run), only for cells that needed any.
    pub retries: BTreeMap<(String, u32), u32>,
    pub calls: u64,
}

impl BatchOutcome {
    pub fn total_retries(&self) -> u32 {
        self.retries.values().sum()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("runs must be at least 1")]
    NoRuns,
    #[error("concurrency must be at least 1")]
    NoConcurrency,
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{failed} of {total} evaluations failed (limit {limit_pct:.0}%)")]
    TooManyFailures {
        failed: usize,
        total: usize,
        limit_pct: f64,
        failures: Vec<CallFailure>,
    },
}

/// Rater id for a 0-based run index.
pub fn run_rater_id(run: u32) -> String {
    format!("run{}", run + 1)
}

struct CellResult {
    record: Option<EvaluationRecord>,
    failure: Option<CallFailure>,
    retries: u32,
}

/// Scores every work in `sample` `runs` times with `provider`.
///
/// Calls use temperature 0. Replies that fail to parse are retried with the
/// output format restated, up to `max_parse_attempts` attempts in total; a
/// provider error fails the cell immediately. Records come back ordered by
/// sample position then run regardless of completion order.
pub fn evaluate_batch(
    sample: &CorpusSample,
    scenario: &PromptScenario,
    mode: ScoringMode,
    runs: u32,
    provider: &dyn CompletionProvider,
    rubric: &Rubric,
    options: &BatchOptions,
) -> Result<BatchOutcome, EvalError> {
    if runs == 0 {
        return Err(EvalError::NoRuns);
    }
    if options.concurrency == 0 {
        return Err(EvalError::NoConcurrency);
    }
    let prompts = sample
        .records
        .iter()
        .map(|w| build_prompt(w, scenario, mode, rubric))
        .collect::<Result<Vec<_>, _>>()?;
    let temperature = options.temperature_override.unwrap_or(0.0);
    let source = scenario.kind.source();
    let calls_before = provider.calls();

    let cells: Vec<(usize, u32)> = (0..sample.records.len())
        .flat_map(|w| (0..runs).map(move |r| (w, r)))
        .collect();
    let results: Mutex<Vec<Option<CellResult>>> =
        Mutex::new((0..cells.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);

    let run_cell = |work_idx: usize, run: u32| -> CellResult {
        let work = &sample.records[work_idx];
        let prompt = &prompts[work_idx];
        let attempts = options.max_parse_attempts.max(1);
        let mut last_error = String::new();
        for attempt in 0..attempts {
            let text = if attempt == 0 {
                prompt.text.clone()
            } else {
                prompt.with_format_reminder()
            };
            let request = CompletionRequest {
                prompt: &text,
                temperature,
                max_tokens: options.max_tokens,
                work,
                scenario: scenario.kind,
                mode,
                attempt,
            };
            let reply = match provider.complete(&request) {
                Ok(reply) => reply,
                Err(e) => {
                    return CellResult {
                        record: None,
                        failure: Some(CallFailure {
                            work_id: work.work_id.clone(),
                            run,
                            reason: e.to_string(),
                        }),
                        retries: attempt,
                    }
                }
            };
            match parse_response(&reply, mode) {
                Ok(scores) => {
                    return CellResult {
                        record: Some(EvaluationRecord {
                            work_id: work.work_id.clone(),
                            rater_id: run_rater_id(run),
                            source,
                            scores,
                            raw_response: Some(reply),
                        }),
                        failure: None,
                        retries: attempt,
                    }
                }
                Err(e) => {
                    log::debug!("{} run {}: unparseable reply ({e})", work.work_id, run + 1);
                    last_error = e.to_string();
                }
            }
        }
        CellResult {
            record: None,
            failure: Some(CallFailure {
                work_id: work.work_id.clone(),
                run,
                reason: format!("no parseable reply after {attempts} attempts: {last_error}"),
            }),
            retries: attempts - 1,
        }
    };

    let workers = options.concurrency.min(cells.len().max(1));
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(work_idx, run)) = cells.get(i) else {
                    break;
                };
                let result = run_cell(work_idx, run);
                results.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(result);
            });
        }
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut retries = BTreeMap::new();
    for (cell, result) in cells.iter().zip(results.into_inner().unwrap_or_else(|e| e.into_inner())) {
        let result = result.expect("every cell is processed");
        if result.retries > 0 {
            retries.insert((sample.records[cell.0].work_id.clone(), cell.1), result.retries);
        }
        records.extend(result.record);
        failures.extend(result.failure);
    }

    let total = cells.len();
    if failures.len() as f64 > options.max_failure_fraction * total as f64 {
        return Err(EvalError::TooManyFailures {
            failed: failures.len(),
            total,
            limit_pct: options.max_failure_fraction * 100.0,
            failures,
        });
    }
    for f in &failures {
        log::warn!("{} run {} failed: {}", f.work_id, f.run + 1, f.reason);
    }
    let dataset = EvaluationDataset::new(sample.work_ids(), records)?;
    Ok(BatchOutcome {
        dataset,
        failures,
        retries,
        calls: provider.calls() - calls_before,
    })
}
