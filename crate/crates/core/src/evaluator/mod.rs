//! Rubric scoring with a language model.
//!
//! A [`Rubric`] and a [`PromptScenario`] produce a prompt per work
//! ([`build_prompt`]); a [`CompletionProvider`] answers it and
//! [`parse_response`] turns the answer into a validated [`ScoreVector`].
//! [`evaluate_batch`] repeats this over a sample for several runs and
//! collects an [`EvaluationDataset`].

mod batch;
mod dataset;
mod mock;
mod parse;
mod prompt;
mod provider;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Question;

pub use batch::{evaluate_batch, BatchOptions, BatchOutcome, CallFailure, EvalError};
pub use dataset::{DatasetError, DatasetMetadata, EvaluationDataset, EvaluationRecord, MissingEntry};
pub use mock::{BiasMarker, MockProvider, ScriptedProvider};
pub use parse::{parse_response, ParseError};
pub use prompt::{
    build_prompt, Exemplar, Prompt, PromptError, PromptScenario, Rubric, RubricQuestion,
    ANTI_HALLUCINATION,
};
pub use provider::{
    CompletionProvider, CompletionRequest, HttpProvider, HttpProviderConfig, ProviderError,
};

/// How answers are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringMode {
    /// 1 = yes, 0 = no.
    Binary,
    /// Integers 1..=10.
    Scalar10,
}

impl ScoringMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoringMode::Binary => "binary",
            ScoringMode::Scalar10 => "scalar10",
        }
    }

    pub fn range(self) -> (u8, u8) {
        match self {
            ScoringMode::Binary => (0, 1),
            ScoringMode::Scalar10 => (1, 10),
        }
    }

    /// Maps a raw answer onto [0, 1].
    pub fn normalize(self, value: u8) -> f64 {
        match self {
            ScoringMode::Binary => f64::from(value),
            ScoringMode::Scalar10 => f64::from(value) / 10.0,
        }
    }
}

impl fmt::Display for ScoringMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoringMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "binary" => Ok(ScoringMode::Binary),
            "scalar10" | "scalar" => Ok(ScoringMode::Scalar10),
            other => Err(format!("unknown scoring mode {other:?}")),
        }
    }
}

/// Amount of guidance given to the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    NoShot,
    Context,
    FewShot,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::NoShot => "no_shot",
            ScenarioKind::Context => "context",
            ScenarioKind::FewShot => "few_shot",
        }
    }

    pub fn source(self) -> Source {
        match self {
            ScenarioKind::NoShot => Source::LlmNoShot,
            ScenarioKind::Context => Source::LlmContext,
            ScenarioKind::FewShot => Source::LlmFewShot,
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "no_shot" | "noshot" => Ok(ScenarioKind::NoShot),
            "context" => Ok(ScenarioKind::Context),
            "few_shot" | "fewshot" => Ok(ScenarioKind::FewShot),
            other => Err(format!("unknown scenario {other:?}")),
        }
    }
}

/// Who produced a set of scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Human,
    LlmNoShot,
    LlmContext,
    LlmFewShot,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Human => "human",
            Source::LlmNoShot => "llm_no_shot",
            Source::LlmContext => "llm_context",
            Source::LlmFewShot => "llm_few_shot",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "human" => Ok(Source::Human),
            "llm_no_shot" => Ok(Source::LlmNoShot),
            "llm_context" => Ok(Source::LlmContext),
            "llm_few_shot" => Ok(Source::LlmFewShot),
            other => Err(format!("unknown source {other:?}")),
        }
    }
}

/// Answers to Q1..Q7 from one rater for one work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScoreVector {
    mode: ScoringMode,
    values: [u8; 7],
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{question} = {value} outside {mode} range")]
pub struct ScoreRangeError {
    pub question: Question,
    pub value: i64,
    pub mode: ScoringMode,
}

impl ScoreVector {
    pub fn new(mode: ScoringMode, values: [u8; 7]) -> Result<Self, ScoreRangeError> {
        let (lo, hi) = mode.range();
        for q in Question::ALL {
            let v = values[q.index()];
            if v < lo || v > hi {
                return Err(ScoreRangeError {
                    question: q,
                    value: i64::from(v),
                    mode,
                });
            }
        }
        Ok(Self { mode, values })
    }

    pub fn mode(&self) -> ScoringMode {
        self.mode
    }

    pub fn get(&self, question: Question) -> u8 {
        self.values[question.index()]
    }

    pub fn values(&self) -> [u8; 7] {
        self.values
    }

    pub fn normalized(&self, question: Question) -> f64 {
        self.mode.normalize(self.get(question))
    }
}
