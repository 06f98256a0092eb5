//! Offline providers for tests and fixture runs.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::provider::{CompletionProvider, CompletionRequest, ProviderError};
use super::{ScenarioKind, ScoringMode};
use crate::Question;

fn default_floor() -> f64 {
    0.85
}

/// Raises scores on `questions` for works whose title or abstract contains
/// `keyword` (case-insensitive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasMarker {
    pub keyword: String,
    pub questions: Vec<Question>,
    /// Boosted latent scores are mapped into `[floor, 1)`.
    #[serde(default = "default_floor")]
    pub floor: f64,
}

impl BiasMarker {
    pub fn new(keyword: impl Into<String>, questions: impl IntoIterator<Item = Question>) -> Self {
        Self {
            keyword: keyword.into(),
            questions: questions.into_iter().collect(),
            floor: default_floor(),
        }
    }
}

/// Deterministic stand-in for a language model.
///
/// Each (seed, scenario, work, question) hashes to a latent value in
/// `[0, 1)`. Binary answers are `latent >= 0.5`; scalar answers are
/// `1 + floor(10 * latent)`, so both modes agree on which works clear a
/// 0.6 threshold on the normalized scale. Bias markers lift the latent value
/// into `[floor, 1)`.
#[derive(Debug, Default)]
pub struct MockProvider {
    seed: u64,
    markers: Vec<BiasMarker>,
    calls: AtomicU64,
}

impl MockProvider {
    pub fn new(seed: u64, markers: Vec<BiasMarker>) -> Self {
        Self {
            seed,
            markers,
            calls: AtomicU64::new(0),
        }
    }

    /// Latent value before marker boosts.
    pub fn base_latent(&self, work_id: &str, question: Question, scenario: ScenarioKind) -> f64 {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(scenario.as_str().as_bytes());
        hasher.update([0]);
        hasher.update(work_id.as_bytes());
        hasher.update([0]);
        hasher.update(question.key().as_bytes());
        let digest = hasher.finalize();
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        // 53 high bits give an exactly representable fraction.
        (u64::from_le_bytes(head) >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn latent(&self, work_id: &str, text: &str, question: Question, scenario: ScenarioKind) -> f64 {
        let base = self.base_latent(work_id, question, scenario);
        let lowered = text.to_lowercase();
        let boost = self
            .markers
            .iter()
            .filter(|m| m.questions.contains(&question) && lowered.contains(&m.keyword.to_lowercase()))
            .map(|m| m.floor.clamp(0.0, 1.0))
            .fold(None, |acc: Option<f64>, f| Some(acc.map_or(f, |a| a.max(f))));
        match boost {
            Some(floor) => floor + (1.0 - floor) * base,
            None => base,
        }
    }

    pub fn score(&self, latent: f64, mode: ScoringMode) -> u8 {
        match mode {
            ScoringMode::Binary => u8::from(latent >= 0.5),
            ScoringMode::Scalar10 => (1.0 + (latent * 10.0).floor()).min(10.0) as u8,
        }
    }
}

impl CompletionProvider for MockProvider {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let work = request.work;
        let text = format!("{} {}", work.title, work.abstract_text);
        let fields: Vec<String> = Question::ALL
            .iter()
            .map(|&q| {
                let latent = self.latent(&work.work_id, &text, q, request.scenario);
                format!("\"{q}\": {}", self.score(latent, request.mode))
            })
            .collect();
        Ok(format!("Assessment:\n{{{}}}", fields.join(", ")))
    }

    fn name(&self) -> String {
        format!("mock:{}", self.seed)
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

/// Replays queued replies per work id, deferring to `fallback` once a
/// work's queue is empty.
pub struct ScriptedProvider {
    scripts: Mutex<HashMap<String, VecDeque<Result<String, ProviderError>>>>,
    fallback: Box<dyn CompletionProvider>,
    calls: AtomicU64,
}

impl ScriptedProvider {
    pub fn new(fallback: Box<dyn CompletionProvider>) -> Self {
        Self {
            scripts: Mutex::new(HashMap::new()),
            fallback,
            calls: AtomicU64::new(0),
        }
    }

    pub fn script(
        self,
        work_id: impl Into<String>,
        replies: impl IntoIterator<Item = Result<String, ProviderError>>,
    ) -> Self {
        self.scripts
            .lock()
            .unwrap()
            .entry(work_id.into())
            .or_default()
            .extend(replies);
        self
    }
}

impl CompletionProvider for ScriptedProvider {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let next = self
            .scripts
            .lock()
            .unwrap()
            .get_mut(&request.work.work_id)
            .and_then(VecDeque::pop_front);
        match next {
            Some(reply) => reply,
            None => self.fallback.complete(request),
        }
    }

    fn name(&self) -> String {
        format!("scripted+{}", self.fallback.name())
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}
