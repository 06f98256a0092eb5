use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ScenarioKind, ScoringMode};
use crate::corpus::WorkRecord;
use crate::Question;

/// Fixed instruction opening every prompt.
pub const ANTI_HALLUCINATION: &str = "Do not hallucinate. Only provide truthful answers.";

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("invalid prompt configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Load { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricQuestion {
    pub key: Question,
    pub short_name: String,
    pub text: String,
    /// Guidance shown alongside the question in context scenarios.
    #[serde(default)]
    pub context: String,
}

/// The seven-question assessment, always ordered Q1..Q7.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rubric {
    questions: Vec<RubricQuestion>,
}

impl Rubric {
    pub fn new(questions: Vec<RubricQuestion>) -> Result<Self, PromptError> {
        if questions.len() != 7 {
            return Err(PromptError::Config(format!(
                "rubric needs exactly 7 questions, got {}",
                questions.len()
            )));
        }
        for (q, expected) in questions.iter().zip(Question::ALL) {
            if q.key != expected {
                return Err(PromptError::Config(format!(
                    "rubric question {} found where {expected} expected",
                    q.key
                )));
            }
            if q.text.trim().is_empty() {
                return Err(PromptError::Config(format!("rubric question {} has no text", q.key)));
            }
        }
        Ok(Self { questions })
    }

    /// Climate-innovation rubric with short default guidance paragraphs.
    pub fn climate_default() -> Self {
        let q = |key: Question, text: &str, context: &str| RubricQuestion {
            key,
            short_name: key.short_name().to_string(),
            text: text.to_string(),
            context: context.to_string(),
        };
        Self::new(vec![
            q(
                Question::Q1,
                "Could this research feasibly lead to a reduction of greenhouse gas emissions or removal of carbon dioxide from the atmosphere?",
                "Answer yes when a plausible pathway exists from the work to lower emissions or to carbon removal, even if indirect.",
            ),
            q(
                Question::Q2,
                "Does this research describe a technology with practical application?",
                "A technology is a device, material, process or method that could be used outside the laboratory.",
            ),
            q(
                Question::Q3,
                "Does this research demonstrate that proof-of-concept has been achieved prior to commercialisation or deployment?",
                "Look for experimental validation, prototypes or field trials rather than purely theoretical results.",
            ),
            q(
                Question::Q4,
                "Does a clear commercial market or industry need exist for this research?",
                "Consider whether identifiable customers or industries would pay for the outcome.",
            ),
            q(
                Question::Q5,
                "Rather than a stand-alone technology, does this research represent the fundamental science that might enable future technology development?",
                "Answer yes for foundational science whose applications are still some steps away.",
            ),
            q(
                Question::Q6,
                "Was this research conducted with an explicit climate change or sustainability application in mind?",
                "The abstract should state a climate or sustainability motivation, not merely allow one.",
            ),
            q(
                Question::Q7,
                "Is this research more likely than not to be neglected by existing innovation support mechanisms in the UK?",
                "Judge whether typical funding, accelerator and investment routes are likely to overlook the work.",
            ),
        ])
        .expect("default rubric is well formed")
    }

    /// Reads a TOML file with seven `[[questions]]` tables.
    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let err = |message: String| PromptError::Load {
            path: path.to_path_buf(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let rubric: Rubric = toml::from_str(&text).map_err(|e| err(e.to_string()))?;
        Self::new(rubric.questions).map_err(|e| err(e.to_string()))
    }

    pub fn questions(&self) -> &[RubricQuestion] {
        &self.questions
    }

    pub fn question(&self, key: Question) -> &RubricQuestion {
        &self.questions[key.index()]
    }

    /// Per-question guidance as a single block; empty when no guidance is set.
    pub fn context_block(&self) -> String {
        let mut out = String::new();
        for q in self.questions.iter().filter(|q| !q.context.trim().is_empty()) {
            let _ = writeln!(out, "{} ({}): {}", q.key, q.short_name, q.context.trim());
        }
        out
    }
}

/// A reference abstract for few-shot prompting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
}

impl From<&WorkRecord> for Exemplar {
    fn from(r: &WorkRecord) -> Self {
        Self {
            title: r.title.clone(),
            abstract_text: r.abstract_text.clone(),
        }
    }
}

/// How much guidance accompanies each abstract.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptScenario {
    pub kind: ScenarioKind,
    pub context_text: Option<String>,
    pub exemplars: Vec<Exemplar>,
}

impl PromptScenario {
    pub fn no_shot() -> Self {
        Self {
            kind: ScenarioKind::NoShot,
            context_text: None,
            exemplars: Vec::new(),
        }
    }

    /// Embeds the rubric's per-question guidance.
    pub fn context(rubric: &Rubric) -> Self {
        Self {
            kind: ScenarioKind::Context,
            context_text: Some(rubric.context_block()),
            exemplars: Vec::new(),
        }
    }

    /// Guidance plus exemplar abstracts of successful climate innovations.
    pub fn few_shot(rubric: &Rubric, exemplars: Vec<Exemplar>) -> Self {
        Self {
            kind: ScenarioKind::FewShot,
            context_text: Some(rubric.context_block()),
            exemplars,
        }
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        let has_context = self
            .context_text
            .as_deref()
            .is_some_and(|c| !c.trim().is_empty());
        match self.kind {
            ScenarioKind::NoShot => {
                if self.context_text.is_some() || !self.exemplars.is_empty() {
                    return Err(PromptError::Config(
                        "no-shot scenario takes neither context nor exemplars".into(),
                    ));
                }
            }
            ScenarioKind::Context => {
                if !has_context {
                    return Err(PromptError::Config("context scenario requires context text".into()));
                }
                if !self.exemplars.is_empty() {
                    return Err(PromptError::Config("context scenario takes no exemplars".into()));
                }
            }
            ScenarioKind::FewShot => {
                if !has_context {
                    return Err(PromptError::Config("few-shot scenario requires context text".into()));
                }
                if self.exemplars.is_empty() {
                    return Err(PromptError::Config("few-shot scenario requires exemplars".into()));
                }
            }
        }
        Ok(())
    }
}

/// A rendered prompt. `text` ends with `format_instruction`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub text: String,
    pub format_instruction: String,
}

impl Prompt {
    /// The same prompt with the output format repeated more forcefully, used
    /// after an unparseable answer.
    pub fn with_format_reminder(&self) -> String {
        format!(
            "{}\n\nYour previous answer could not be read. Reply with the JSON object only, no other text.\n{}",
            self.text, self.format_instruction
        )
    }
}

fn format_instruction(mode: ScoringMode) -> String {
    let (rule, example) = match mode {
        ScoringMode::Binary => (
            "Each value must be the integer 1 (Yes) or 0 (No).",
            r#"{"Q1": 1, "Q2": 0, "Q3": 0, "Q4": 1, "Q5": 0, "Q6": 1, "Q7": 0}"#,
        ),
        ScoringMode::Scalar10 => (
            "Each value must be an integer from 1 (lowest) to 10 (highest).",
            r#"{"Q1": 7, "Q2": 3, "Q3": 5, "Q4": 8, "Q5": 2, "Q6": 9, "Q7": 4}"#,
        ),
    };
    format!(
        "Respond with a single JSON object with exactly the keys \"Q1\", \"Q2\", \"Q3\", \"Q4\", \"Q5\", \"Q6\" and \"Q7\". {rule} Example: {example}"
    )
}

/// Renders the prompt for one work. Output depends only on the arguments.
pub fn build_prompt(
    work: &WorkRecord,
    scenario: &PromptScenario,
    mode: ScoringMode,
    rubric: &Rubric,
) -> Result<Prompt, PromptError> {
    scenario.validate()?;
    let mut text = String::new();
    text.push_str(
        "You are assessing a research abstract for its potential to become a climate innovation.\n",
    );
    text.push_str(ANTI_HALLUCINATION);
    text.push_str("\n\n");

    if let Some(context) = scenario.context_text.as_deref() {
        text.push_str("Guidance on the purpose of each question:\n");
        text.push_str(context.trim_end());
        text.push_str("\n\n");
    }

    if !scenario.exemplars.is_empty() {
        text.push_str(
            "The following example abstracts describe research that led to successful climate-tech \
             spin-out companies with high potential to mitigate climate change. Use them as a \
             reference for what a successful climate innovation looks like.\n\n",
        );
        for (i, ex) in scenario.exemplars.iter().enumerate() {
            let _ = writeln!(text, "Example {}:\nTitle: {}\nAbstract: {}\n", i + 1, ex.title.trim(), ex.abstract_text.trim());
        }
    }

    let _ = writeln!(
        text,
        "Abstract to assess:\nTitle: {}\nAbstract: {}\n",
        work.title.trim(),
        work.abstract_text.trim()
    );

    text.push_str("Questions:\n");
    for q in rubric.questions() {
        let _ = writeln!(text, "{} ({}): {}", q.key, q.short_name, q.text);
    }
    text.push('\n');

    let format_instruction = format_instruction(mode);
    text.push_str(&format_instruction);
    Ok(Prompt {
        text,
        format_instruction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::RecordSource;

    fn work() -> WorkRecord {
        WorkRecord {
            work_id: "W1".into(),
            title: "Porous sorbents for direct air capture".into(),
            abstract_text: "We report an amine sorbent that captures CO2 from air.".into(),
            publication_year: 2021,
            topics: vec![],
            keywords: vec![],
            is_control: false,
            source: RecordSource::Harvested,
        }
    }

    fn exemplars(n: usize) -> Vec<Exemplar> {
        (0..n)
            .map(|i| Exemplar {
                title: format!("Spin-out {i}"),
                abstract_text: format!("EXEMPLAR-ABSTRACT-{i} describes a commercialised process."),
            })
            .collect()
    }

    #[test]
    fn no_shot_has_instruction_and_no_context() {
        let rubric = Rubric::climate_default();
        let p = build_prompt(&work(), &PromptScenario::no_shot(), ScoringMode::Binary, &rubric).unwrap();
        assert!(p.text.contains("Do not hallucinate. Only provide truthful answers."));
        for q in rubric.questions() {
            assert!(!p.text.contains(&q.context));
            assert!(p.text.contains(&q.text));
        }
        assert!(p.text.contains(&work().abstract_text));
        assert!(p.text.ends_with(&p.format_instruction));
    }

    #[test]
    fn context_scenario_embeds_guidance() {
        let rubric = Rubric::climate_default();
        let scenario = PromptScenario::context(&rubric);
        let p = build_prompt(&work(), &scenario, ScoringMode::Scalar10, &rubric).unwrap();
        for q in rubric.questions() {
            assert!(p.text.contains(&q.context));
        }
        assert!(p.format_instruction.contains("integer from 1 (lowest) to 10 (highest)"));
        for q in Question::ALL {
            assert!(p.format_instruction.contains(&format!("\"{q}\"")));
        }
    }

    #[test]
    fn few_shot_places_all_exemplars_before_target() {
        let rubric = Rubric::climate_default();
        let scenario = PromptScenario::few_shot(&rubric, exemplars(10));
        let p = build_prompt(&work(), &scenario, ScoringMode::Binary, &rubric).unwrap();
        let target = p.text.find(&work().abstract_text).unwrap();
        for i in 0..10 {
            let at = p.text.find(&format!("EXEMPLAR-ABSTRACT-{i} ")).unwrap();
            assert!(at < target);
        }
    }

    #[test]
    fn missing_context_is_a_config_error() {
        let rubric = Rubric::climate_default();
        let mut scenario = PromptScenario::context(&rubric);
        scenario.context_text = None;
        assert!(matches!(
            build_prompt(&work(), &scenario, ScoringMode::Binary, &rubric),
            Err(PromptError::Config(_))
        ));
        let few = PromptScenario::few_shot(&rubric, vec![]);
        assert!(few.validate().is_err());
    }

    #[test]
    fn prompts_are_pure() {
        let rubric = Rubric::climate_default();
        let scenario = PromptScenario::few_shot(&rubric, exemplars(3));
        let a = build_prompt(&work(), &scenario, ScoringMode::Binary, &rubric).unwrap();
        let b = build_prompt(&work(), &scenario, ScoringMode::Binary, &rubric).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rubric_must_have_seven_ordered_questions() {
        let mut qs = Rubric::climate_default().questions().to_vec();
        qs.swap(0, 1);
        assert!(Rubric::new(qs.clone()).is_err());
        qs.truncate(6);
        assert!(Rubric::new(qs).is_err());
    }

    #[test]
    fn rubric_loads_from_toml() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rubric.toml");
        let text = toml::to_string(&Rubric::climate_default()).unwrap();
        fs::write(&path, text).unwrap();
        assert_eq!(Rubric::load(&path).unwrap(), Rubric::climate_default());
    }
}
