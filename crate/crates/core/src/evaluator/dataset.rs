use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ScoreVector, ScoringMode, Source};
use crate::Question;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("duplicate record for work {work_id}, rater {rater_id}, source {panel}")]
    Duplicate {
        work_id: String,
        rater_id: String,
        panel: Source,
    },
    #[error("record references unknown work {0}")]
    UnknownWork(String),
    #[error("dataset mixes scoring modes {0} and {1}")]
    MixedModes(ScoringMode, ScoringMode),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: u64,
        message: String,
    },
}

/// One rater's answers for one work.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    pub work_id: String,
    pub rater_id: String,
    pub source: Source,
    pub scores: ScoreVector,
    pub raw_response: Option<String>,
}

/// A (source, rater, work) cell with no record.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MissingEntry {
    pub source: Source,
    pub rater_id: String,
    pub work_id: String,
}

/// Panel of score vectors keyed by (work, rater, source).
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationDataset {
    records: Vec<EvaluationRecord>,
    works: Vec<String>,
    raters_per_source: BTreeMap<Source, usize>,
}

impl EvaluationDataset {
    /// Builds a dataset over `works`. Every record must reference one of
    /// them, all records must share a scoring mode and (work, rater, source)
    /// must be unique.
    pub fn new(works: Vec<String>, records: Vec<EvaluationRecord>) -> Result<Self, DatasetError> {
        let known: HashSet<&str> = works.iter().map(String::as_str).collect();
        let mut keys = HashSet::new();
        let mut raters: BTreeMap<Source, BTreeSet<&str>> = BTreeMap::new();
        let mut mode = None;
        for r in &records {
            if !known.contains(r.work_id.as_str()) {
                return Err(DatasetError::UnknownWork(r.work_id.clone()));
            }
            match mode {
                None => mode = Some(r.scores.mode()),
                Some(m) if m != r.scores.mode() => {
                    return Err(DatasetError::MixedModes(m, r.scores.mode()))
                }
                _ => {}
            }
            if !keys.insert((r.work_id.as_str(), r.rater_id.as_str(), r.source)) {
                return Err(DatasetError::Duplicate {
                    work_id: r.work_id.clone(),
                    rater_id: r.rater_id.clone(),
                    panel: r.source,
                });
            }
            raters.entry(r.source).or_default().insert(&r.rater_id);
        }
        let raters_per_source = raters.into_iter().map(|(s, set)| (s, set.len())).collect();
        Ok(Self {
            records,
            works,
            raters_per_source,
        })
    }

    pub fn records(&self) -> &[EvaluationRecord] {
        &self.records
    }

    pub fn works(&self) -> &[String] {
        &self.works
    }

    pub fn raters_per_source(&self) -> &BTreeMap<Source, usize> {
        &self.raters_per_source
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Scoring mode shared by all records, `None` when empty.
    pub fn mode(&self) -> Option<ScoringMode> {
        self.records.first().map(|r| r.scores.mode())
    }

    pub fn sources(&self) -> Vec<Source> {
        self.raters_per_source.keys().copied().collect()
    }

    /// Records of one source, over the same work list.
    pub fn for_source(&self, source: Source) -> EvaluationDataset {
        let records = self
            .records
            .iter()
            .filter(|r| r.source == source)
            .cloned()
            .collect();
        Self::new(self.works.clone(), records).expect("subset of a valid dataset is valid")
    }

    /// Cells absent from the full (work × rater) panel of each source.
    pub fn missing(&self) -> Vec<MissingEntry> {
        let mut raters: BTreeMap<Source, BTreeSet<&str>> = BTreeMap::new();
        let mut present = HashSet::new();
        for r in &self.records {
            raters.entry(r.source).or_default().insert(&r.rater_id);
            present.insert((r.source, r.rater_id.as_str(), r.work_id.as_str()));
        }
        let mut missing = Vec::new();
        for (source, ids) in &raters {
            for rater in ids {
                for work in &self.works {
                    if !present.contains(&(*source, *rater, work.as_str())) {
                        missing.push(MissingEntry {
                            source: *source,
                            rater_id: rater.to_string(),
                            work_id: work.clone(),
                        });
                    }
                }
            }
        }
        missing
    }

    pub fn is_complete(&self) -> bool {
        self.missing().is_empty()
    }

    /// Writes `work_id,rater_id,source,mode,q1..q7`, one row per record.
    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let io = |source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(io)?;
        }
        let mut writer = csv::Writer::from_writer(File::create(path).map_err(io)?);
        let csv_err = |e: csv::Error| io(std::io::Error::other(e));
        writer
            .write_record([
                "work_id", "rater_id", "source", "mode", "q1", "q2", "q3", "q4", "q5", "q6", "q7",
            ])
            .map_err(csv_err)?;
        for r in &self.records {
            let mut row = vec![
                r.work_id.clone(),
                r.rater_id.clone(),
                r.source.to_string(),
                r.scores.mode().to_string(),
            ];
            row.extend(r.scores.values().iter().map(u8::to_string));
            writer.write_record(&row).map_err(csv_err)?;
        }
        writer.flush().map_err(io)?;
        Ok(())
    }

    /// Reads a file written by [`save`](Self::save). The work list is the
    /// record work ids in order of first appearance.
    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let file = File::open(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut reader = csv::Reader::from_reader(file);
        let mut records = Vec::new();
        let mut works = Vec::new();
        let mut seen = HashSet::new();
        for row in reader.records() {
            let malformed = |line: u64, message: String| DatasetError::Malformed {
                path: path.to_path_buf(),
                line,
                message,
            };
            let row = row.map_err(|e| {
                malformed(e.position().map(|p| p.line()).unwrap_or(0), e.to_string())
            })?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            if row.len() != 11 {
                return Err(malformed(line, format!("expected 11 fields, found {}", row.len())));
            }
            let source: Source = row[2].parse().map_err(|e| malformed(line, e))?;
            let mode: ScoringMode = row[3].parse().map_err(|e| malformed(line, e))?;
            let mut values = [0u8; 7];
            for q in Question::ALL {
                let field = &row[4 + q.index()];
                values[q.index()] = field
                    .trim()
                    .parse()
                    .map_err(|_| malformed(line, format!("{q} value {field:?} is not a score")))?;
            }
            let scores = ScoreVector::new(mode, values).map_err(|e| malformed(line, e.to_string()))?;
            let work_id = row[0].to_string();
            if seen.insert(work_id.clone()) {
                works.push(work_id.clone());
            }
            records.push(EvaluationRecord {
                work_id,
                rater_id: row[1].to_string(),
                source,
                scores,
                raw_response: None,
            });
        }
        Self::new(works, records)
    }
}

/// Sidecar with run metadata kept out of the replayable outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub created_unix_seconds: u64,
    pub provider: String,
    pub calls: u64,
    pub parse_retries: u32,
    pub failures: usize,
}

impl DatasetMetadata {
    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut file = File::create(path)?;
        serde_json::to_writer_pretty(&mut file, self)?;
        file.write_all(b"\n")
    }
}
