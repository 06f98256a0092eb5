//! Generated offline corpora for demos and tests.
//!
//! Harvested works get bland abstracts assembled from a fixed vocabulary;
//! positive controls carry [`CONTROL_MARKER`], which a marker-aware
//! [`MockProvider`](crate::evaluator::MockProvider) boosts.

use std::fs;
use std::path::{Path, PathBuf};

use rand_chacha::ChaCha8Rng;

use crate::corpus::{save_corpus, seeded_rng, uniform_below, CorpusError, RecordSource, WorkRecord};
use crate::openalex::{invert_abstract, write_fixture_pages, IngestError, RawWork, TopicRef, MAX_PAGE_SIZE};
use crate::Question;

/// Phrase present in every control abstract and absent from harvested ones.
pub const CONTROL_MARKER: &str = "electrochemical carbon capture";

/// Questions a control's marker lifts in generated configs.
pub const CONTROL_BOOSTED: [Question; 7] = Question::ALL;

const IN_SCOPE_TOPICS: [(&str, &str, &str); 4] = [
    ("T10210", "2105", "3"),
    ("T10462", "2102", "3"),
    ("T11398", "2208", "3"),
    ("T10932", "2505", "3"),
];
const OFF_SCOPE_TOPIC: (&str, &str, &str) = ("T12345", "3312", "2");

const SUBJECTS: [&str; 12] = [
    "perovskite solar cells",
    "soil microbial communities",
    "offshore wind turbines",
    "lithium-ion battery cathodes",
    "urban heat islands",
    "peatland restoration",
    "hydrogen storage alloys",
    "coastal sediment transport",
    "building insulation retrofits",
    "agricultural nitrogen runoff",
    "grid frequency control",
    "bio-based polymers",
];
const METHODS: [&str; 8] = [
    "a field campaign",
    "high-resolution simulations",
    "a controlled laboratory study",
    "a techno-economic model",
    "machine-learning surrogates",
    "long-term monitoring data",
    "a life-cycle assessment",
    "in situ spectroscopy",
];
const FINDINGS: [&str; 8] = [
    "efficiency improves under realistic operating conditions",
    "performance degrades faster than previously assumed",
    "costs fall sharply at larger scales",
    "seasonal variability dominates the observed signal",
    "a simple design change reduces material use",
    "existing standards underestimate the effect",
    "the process is stable over hundreds of cycles",
    "regional differences are larger than expected",
];
const KEYWORDS: [&str; 10] = [
    "solar energy",
    "wind power",
    "energy storage",
    "materials science",
    "hydrology",
    "ecosystem services",
    "building energy",
    "agriculture",
    "power systems",
    "polymers",
];

/// Shape of a generated corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    /// Works with usable abstracts and in-scope topics.
    pub n_eligible: usize,
    pub n_without_abstract: usize,
    pub n_off_scope: usize,
    pub n_controls: usize,
    pub n_exemplars: usize,
    pub seed: u64,
    pub page_size: usize,
}

impl SyntheticSpec {
    pub fn new(n_eligible: usize, n_controls: usize, seed: u64) -> Self {
        Self {
            n_eligible,
            n_without_abstract: 0,
            n_off_scope: 0,
            n_controls,
            n_exemplars: 2,
            seed,
            page_size: MAX_PAGE_SIZE as usize,
        }
    }
}

/// Files written by [`write_synthetic`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLayout {
    pub pages_dir: PathBuf,
    pub whitelist: PathBuf,
    pub controls: PathBuf,
    pub exemplars: PathBuf,
    pub n_raw: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum SyntheticError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items[uniform_below(rng, items.len() as u64) as usize]
}

fn bland_abstract(rng: &mut ChaCha8Rng) -> (String, String, Vec<String>) {
    let subject = pick(rng, &SUBJECTS);
    let title = format!("On {subject}: evidence from {}", pick(rng, &METHODS));
    let text = format!(
        "We study {subject} using {}. Results show that {}. We also find that {}.",
        pick(rng, &METHODS),
        pick(rng, &FINDINGS),
        pick(rng, &FINDINGS)
    );
    let mut keywords: Vec<String> = (0..1 + uniform_below(rng, 3))
        .map(|_| pick(rng, &KEYWORDS).to_string())
        .collect();
    keywords.sort();
    keywords.dedup();
    (title, text, keywords)
}

fn topic(t: (&str, &str, &str)) -> TopicRef {
    TopicRef {
        topic_id: t.0.into(),
        subfield_id: t.1.into(),
        domain_id: t.2.into(),
    }
}

/// Harvested works in page order: eligible works first, then works without
/// an abstract, then works with an out-of-scope topic.
pub fn synthetic_raw_works(spec: &SyntheticSpec) -> Vec<RawWork> {
    let mut rng = seeded_rng(spec.seed, 7);
    let total = spec.n_eligible + spec.n_without_abstract + spec.n_off_scope;
    (0..total)
        .map(|i| {
            let (title, text, keywords) = bland_abstract(&mut rng);
            let in_scope = topic(IN_SCOPE_TOPICS[uniform_below(&mut rng, IN_SCOPE_TOPICS.len() as u64) as usize]);
            let (index, topics) = if i < spec.n_eligible {
                (Some(invert_abstract(&text)), vec![in_scope])
            } else if i < spec.n_eligible + spec.n_without_abstract {
                (None, vec![in_scope])
            } else {
                (Some(invert_abstract(&text)), vec![in_scope, topic(OFF_SCOPE_TOPIC)])
            };
            RawWork {
                openalex_id: format!("W{}", 4_000_000_000u64 + i as u64),
                title,
                abstract_inverted_index: index,
                publication_year: 2000 + uniform_below(&mut rng, 24) as i32,
                work_type: "article".into(),
                topics,
                keywords,
                corresponding_institutions: vec!["I47508984".into()],
            }
        })
        .collect()
}

/// Positive controls mentioning [`CONTROL_MARKER`].
pub fn synthetic_controls(n: usize, seed: u64) -> Vec<WorkRecord> {
    let mut rng = seeded_rng(seed, 8);
    (0..n)
        .map(|i| {
            let (_, text, _) = bland_abstract(&mut rng);
            WorkRecord {
                work_id: format!("C{:04}", i + 1),
                title: format!("Scalable {CONTROL_MARKER} module {}", i + 1),
                abstract_text: format!(
                    "We demonstrate {CONTROL_MARKER} at pilot scale with a modular reactor. {text}"
                ),
                publication_year: 2015 + (i % 8) as i32,
                topics: vec![IN_SCOPE_TOPICS[0].0.into()],
                keywords: vec!["carbon capture".into(), "electrochemistry".into()],
                is_control: true,
                source: RecordSource::Control,
            }
        })
        .collect()
}

/// Writes fixture pages, a topic whitelist, a controls file and an
/// exemplars file under `dir`.
pub fn write_synthetic(dir: &Path, spec: &SyntheticSpec) -> Result<SyntheticLayout, SyntheticError> {
    fs::create_dir_all(dir).map_err(|source| SyntheticError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let works = synthetic_raw_works(spec);
    let pages_dir = dir.join("pages");
    write_fixture_pages(&pages_dir, &works, spec.page_size)?;

    let whitelist = dir.join("topics.txt");
    let mut text = String::from("# in-scope topic ids\n");
    for t in IN_SCOPE_TOPICS {
        text.push_str(t.0);
        text.push('\n');
    }
    fs::write(&whitelist, text).map_err(|source| SyntheticError::Io {
        path: whitelist.clone(),
        source,
    })?;

    let controls = dir.join("controls.jsonl");
    save_corpus(&synthetic_controls(spec.n_controls, spec.seed), &controls)?;

    let exemplars = dir.join("exemplars.jsonl");
    let mut examples = synthetic_controls(spec.n_exemplars, spec.seed ^ 0x5eed);
    for (i, e) in examples.iter_mut().enumerate() {
        e.work_id = format!("X{:04}", i + 1);
    }
    save_corpus(&examples, &exemplars)?;

    Ok(SyntheticLayout {
        pages_dir,
        whitelist,
        controls,
        exemplars,
        n_raw: works.len(),
    })
}
