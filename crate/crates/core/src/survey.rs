//! Human survey ingestion.
//!
//! Survey files are CSV with the header
//! `respondent_id,work_id,q1,q2,q3,q4,q5,q6,q7` and one binary row per
//! (respondent, work). Missing rows are tolerated and reported.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::Read;
use std::path::{Path, PathBuf};

use crate::corpus::CorpusSample;
use crate::evaluator::{
    DatasetError, EvaluationDataset, EvaluationRecord, MissingEntry, ScoreVector, ScoringMode,
    Source,
};
use crate::Question;

pub const SURVEY_HEADER: [&str; 9] = [
    "respondent_id",
    "work_id",
    "q1",
    "q2",
    "q3",
    "q4",
    "q5",
    "q6",
    "q7",
];

#[derive(Debug, thiserror::Error)]
pub enum SurveyError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("header must be {}, found {found}", SURVEY_HEADER.join(","))]
    Header { found: String },
    #[error("line {line}: {message}")]
    Validation { line: u64, message: String },
    #[error("line {line}: work {work_id} is not in the sample")]
    UnknownWork { line: u64, work_id: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Ingested responses plus the cells nobody answered.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyIngest {
    pub dataset: EvaluationDataset,
    pub missing: Vec<MissingEntry>,
}

/// Parses survey CSV text against the sample's work ids.
pub fn parse_survey<R: Read>(input: R, sample: &CorpusSample) -> Result<SurveyIngest, SurveyError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| SurveyError::Header { found: e.to_string() })?
        .clone();
    let header_ok = header.len() == SURVEY_HEADER.len()
        && header
            .iter()
            .zip(SURVEY_HEADER)
            .all(|(h, want)| h.trim_start_matches('\u{feff}').eq_ignore_ascii_case(want));
    if !header_ok {
        return Err(SurveyError::Header {
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let known: HashSet<&str> = sample.records.iter().map(|r| r.work_id.as_str()).collect();
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| SurveyError::Validation {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let invalid = |message: String| SurveyError::Validation { line, message };
        if row.len() != SURVEY_HEADER.len() {
            return Err(invalid(format!("expected 9 fields, found {}", row.len())));
        }
        let respondent = row[0].to_string();
        let work_id = row[1].to_string();
        if respondent.is_empty() {
            return Err(invalid("empty respondent_id".into()));
        }
        if !known.contains(work_id.as_str()) {
            return Err(SurveyError::UnknownWork { line, work_id });
        }
        if !seen.insert((respondent.clone(), work_id.clone())) {
            return Err(invalid(format!("duplicate response from {respondent} for {work_id}")));
        }
        let mut values = [0u8; 7];
        for q in Question::ALL {
            let field = &row[2 + q.index()];
            values[q.index()] = match field {
                "0" => 0,
                "1" => 1,
                other => return Err(invalid(format!("{q} must be 0 or 1, found {other:?}"))),
            };
        }
        records.push(EvaluationRecord {
            work_id,
            rater_id: respondent,
            source: Source::Human,
            scores: ScoreVector::new(ScoringMode::Binary, values).expect("binary values checked"),
            raw_response: None,
        });
    }
    let dataset = EvaluationDataset::new(sample.work_ids(), records)?;
    let missing = dataset.missing();
    Ok(SurveyIngest { dataset, missing })
}

pub fn ingest_survey(path: &Path, sample: &CorpusSample) -> Result<SurveyIngest, SurveyError> {
    let file = File::open(path).map_err(|source| SurveyError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_survey(file, sample)
}

/// Writes the human records of `dataset` in survey format.
pub fn export_survey(dataset: &EvaluationDataset, path: &Path) -> Result<usize, SurveyError> {
    let io = |source| SurveyError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    let mut writer = csv::Writer::from_writer(File::create(path).map_err(io)?);
    let csv_err = |e: csv::Error| io(std::io::Error::other(e));
    writer.write_record(SURVEY_HEADER).map_err(csv_err)?;
    let mut written = 0;
    for r in dataset.records().iter().filter(|r| r.source == Source::Human) {
        let mut row = vec![r.rater_id.clone(), r.work_id.clone()];
        row.extend(r.scores.values().iter().map(u8::to_string));
        writer.write_record(&row).map_err(csv_err)?;
        written += 1;
    }
    writer.flush().map_err(io)?;
    Ok(written)
}
