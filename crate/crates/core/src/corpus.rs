//! Corpus persistence, seeded sampling and positive-control spiking.
//!
//! Corpus and control files hold one JSON object per line. Sampling uses
//! ChaCha8 keyed by the seed (little-endian in the first eight key bytes,
//! remaining bytes zero) with a partial Fisher-Yates shuffle and rejection
//! sampling for bounded integers, so a sample can be replayed by any
//! implementation of the same generator.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::openalex::RawWork;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid record {work_id}: {message}")]
    Invalid { work_id: String, message: String },
    #[error("cannot draw {requested} records from a corpus of {available}")]
    Size { requested: usize, available: usize },
    #[error("duplicate work id {0}")]
    Duplicate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordSource {
    Harvested,
    Control,
}

/// A work ready for evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkRecord {
    pub work_id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub publication_year: i32,
    #[serde(default)]
    pub topics: Vec<String>,
    #[serde(default)]
    pub keywords: Vec<String>,
    pub is_control: bool,
    pub source: RecordSource,
}

impl WorkRecord {
    pub fn from_raw(raw: &RawWork) -> Result<Self, CorpusError> {
        let abstract_text = raw.abstract_text().map_err(|e| CorpusError::Invalid {
            work_id: raw.openalex_id.clone(),
            message: e.to_string(),
        })?;
        let record = Self {
            work_id: raw.openalex_id.clone(),
            title: raw.title.clone(),
            abstract_text,
            publication_year: raw.publication_year,
            topics: raw.topics.iter().map(|t| t.topic_id.clone()).collect(),
            keywords: raw.keywords.clone(),
            is_control: false,
            source: RecordSource::Harvested,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let invalid = |message: &str| CorpusError::Invalid {
            work_id: self.work_id.clone(),
            message: message.into(),
        };
        if self.work_id.trim().is_empty() {
            return Err(invalid("empty work_id"));
        }
        if self.abstract_text.trim().is_empty() {
            return Err(invalid("empty abstract"));
        }
        if self.is_control != (self.source == RecordSource::Control) {
            return Err(invalid("is_control must be set exactly for control records"));
        }
        Ok(())
    }

    /// Marks the record as a positive control.
    pub fn into_control(mut self) -> Self {
        self.is_control = true;
        self.source = RecordSource::Control;
        self
    }
}

/// Writes one JSON object per line.
pub fn save_corpus(records: &[WorkRecord], path: &Path) -> Result<usize, CorpusError> {
    let io = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for record in records {
        serde_json::to_writer(&mut out, record).map_err(|e| io(e.into()))?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)?;
    Ok(records.len())
}

pub fn load_corpus(path: &Path) -> Result<Vec<WorkRecord>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| CorpusError::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let record: WorkRecord = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        record.validate().map_err(|e| malformed(e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}

/// Generator for stream `stream` of `seed`.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// Uniform integer in `[0, bound)` by rejection sampling on 64-bit draws.
pub(crate) fn uniform_below(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let x = rng.next_u64();
        if x < zone {
            return x % bound;
        }
    }
}

/// Partial Fisher-Yates: the first `n` items end up a uniform draw without
/// replacement, in draw order.
fn partial_shuffle<T>(items: &mut [T], n: usize, rng: &mut ChaCha8Rng) {
    let len = items.len();
    for i in 0..n.min(len.saturating_sub(1)) {
        let j = i + uniform_below(rng, (len - i) as u64) as usize;
        items.swap(i, j);
    }
}

const SAMPLE_STREAM: u64 = 0;
const SPIKE_STREAM: u64 = 1;

/// Draws `n` distinct records uniformly without replacement.
pub fn sample_random(corpus: &[WorkRecord], n: usize, seed: u64) -> Result<Vec<WorkRecord>, CorpusError> {
    if n > corpus.len() {
        return Err(CorpusError::Size {
            requested: n,
            available: corpus.len(),
        });
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    partial_shuffle(&mut order, n, &mut seeded_rng(seed, SAMPLE_STREAM));
    Ok(order[..n].iter().map(|&i| corpus[i].clone()).collect())
}

/// A random sample with positive controls shuffled in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSample {
    pub records: Vec<WorkRecord>,
    pub seed: u64,
    pub n_random: usize,
    pub n_controls: usize,
}

impl CorpusSample {
    /// Rebuilds a sample from stored records, recounting controls.
    pub fn from_records(records: Vec<WorkRecord>, seed: u64) -> Result<Self, CorpusError> {
        let mut ids = HashSet::new();
        for r in &records {
            r.validate()?;
            if !ids.insert(r.work_id.as_str()) {
                return Err(CorpusError::Duplicate(r.work_id.clone()));
            }
        }
        let n_controls = records.iter().filter(|r| r.is_control).count();
        Ok(Self {
            n_random: records.len() - n_controls,
            n_controls,
            records,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn work_ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.work_id.clone()).collect()
    }

    pub fn control_ids(&self) -> HashSet<String> {
        self.records
            .iter()
            .filter(|r| r.is_control)
            .map(|r| r.work_id.clone())
            .collect()
    }

    pub fn get(&self, work_id: &str) -> Option<&WorkRecord> {
        self.records.iter().find(|r| r.work_id == work_id)
    }
}

/// Appends `controls` (flagged as controls) to `sample` and shuffles the
/// combined list with `seed` so controls are not positionally identifiable.
/// With no controls the sample order is left untouched.
pub fn spike_controls(
    sample: Vec<WorkRecord>,
    controls: Vec<WorkRecord>,
    seed: u64,
) -> Result<CorpusSample, CorpusError> {
    let mut ids = HashSet::new();
    for record in sample.iter().chain(&controls) {
        if !ids.insert(record.work_id.clone()) {
            return Err(CorpusError::Duplicate(record.work_id.clone()));
        }
    }
    let n_random = sample.len();
    let n_controls = controls.len();
    let mut records = sample;
    records.extend(controls.into_iter().map(WorkRecord::into_control));
    if n_controls > 0 {
        let len = records.len();
        partial_shuffle(&mut records, len, &mut seeded_rng(seed, SPIKE_STREAM));
    }
    Ok(CorpusSample {
        records,
        seed,
        n_random,
        n_controls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn record(id: &str) -> WorkRecord {
        WorkRecord {
            work_id: id.into(),
            title: format!("Title {id}"),
            abstract_text: format!("Abstract of {id}."),
            publication_year: 2015,
            topics: vec!["T1".into()],
            keywords: vec!["solar".into()],
            is_control: false,
            source: RecordSource::Harvested,
        }
    }

    fn corpus(n: usize) -> Vec<WorkRecord> {
        (0..n).map(|i| record(&format!("W{i}"))).collect()
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let records = corpus(3);
        assert_eq!(save_corpus(&records, &path).unwrap(), 3);
        assert_eq!(load_corpus(&path).unwrap(), records);
    }

    #[test]
    fn empty_file_loads_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        fs::write(&path, "").unwrap();
        assert!(load_corpus(&path).unwrap().is_empty());
    }

    #[test]
    fn missing_work_id_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let good = serde_json::to_string(&record("W1")).unwrap();
        let bad = good.replace("\"work_id\":\"W1\",", "");
        fs::write(&path, format!("{good}\n{bad}\n")).unwrap();
        match load_corpus(&path) {
            Err(CorpusError::Malformed { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("work_id"), "{message}");
            }
            other => panic!("expected malformed error, got {other:?}"),
        }
    }

    #[test]
    fn control_flag_must_match_source() {
        let mut r = record("W1");
        r.is_control = true;
        assert!(r.validate().is_err());
        assert!(record("W1").into_control().validate().is_ok());
    }

    #[test]
    fn full_draw_is_a_permutation() {
        let c = corpus(20);
        let mut drawn: Vec<_> = sample_random(&c, 20, 7).unwrap().into_iter().map(|r| r.work_id).collect();
        drawn.sort();
        let mut expected: Vec<_> = c.into_iter().map(|r| r.work_id).collect();
        expected.sort();
        assert_eq!(drawn, expected);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let c = corpus(1000);
        let a = sample_random(&c, 95, 42).unwrap();
        assert_eq!(a, sample_random(&c, 95, 42).unwrap());
        let b = sample_random(&c, 95, 43).unwrap();
        let ids = |s: &[WorkRecord]| s.iter().map(|r| r.work_id.clone()).collect::<Vec<_>>();
        assert_ne!(ids(&a), ids(&b));
    }

    #[test]
    fn oversize_draw_rejected() {
        assert!(matches!(
            sample_random(&corpus(3), 4, 1),
            Err(CorpusError::Size { requested: 4, available: 3 })
        ));
    }

    #[test]
    fn spiking_counts_and_flags() {
        let sample = sample_random(&corpus(200), 95, 1).unwrap();
        let controls: Vec<_> = (0..5).map(|i| record(&format!("C{i}"))).collect();
        let spiked = spike_controls(sample, controls, 1).unwrap();
        assert_eq!((spiked.n_random, spiked.n_controls, spiked.len()), (95, 5, 100));
        assert_eq!(spiked.records.iter().filter(|r| r.is_control).count(), 5);
        assert!(spiked
            .records
            .iter()
            .all(|r| r.is_control == r.work_id.starts_with('C')));
        // Controls are not simply left at the end.
        assert!(spiked.records[95..].iter().any(|r| !r.is_control));
    }

    #[test]
    fn thousand_record_validation_sample() {
        let sample = sample_random(&corpus(2000), 990, 9).unwrap();
        let controls: Vec<_> = (0..10).map(|i| record(&format!("C{i}"))).collect();
        let spiked = spike_controls(sample, controls, 9).unwrap();
        assert_eq!(spiked.len(), 1000);
        assert_eq!(spiked.n_controls, 10);
    }

    #[test]
    fn empty_controls_leave_sample_unchanged() {
        let sample = sample_random(&corpus(10), 5, 3).unwrap();
        let spiked = spike_controls(sample.clone(), vec![], 3).unwrap();
        assert_eq!(spiked.records, sample);
        assert_eq!(spiked.n_controls, 0);
    }

    #[test]
    fn colliding_control_rejected() {
        let sample = corpus(3);
        let controls = vec![record("W1")];
        assert!(matches!(
            spike_controls(sample, controls, 0),
            Err(CorpusError::Duplicate(id)) if id == "W1"
        ));
    }

    #[test]
    fn generator_stream_is_pinned() {
        // Replays must not drift across builds.
        let mut rng = seeded_rng(42, 0);
        let first: Vec<u64> = (0..3).map(|_| rng.next_u64()).collect();
        let mut again = seeded_rng(42, 0);
        assert_eq!(first, (0..3).map(|_| again.next_u64()).collect::<Vec<_>>());
        let mut other_stream = seeded_rng(42, 1);
        assert_ne!(first[0], other_stream.next_u64());
    }
}
