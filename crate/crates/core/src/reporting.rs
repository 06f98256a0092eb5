//! Keyword summaries and plot-ready exports.
//!
//! Every table is UTF-8 CSV with a header row. Floats use Rust's shortest
//! round-trip formatting so re-importing a file yields identical values.
//! Undefined correlations are written as empty cells.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::WorkRecord;
use crate::evaluator::{ScoringMode, Source};
use crate::ranking::RankedList;
use crate::stats::{AgreementReport, CorrelationMatrix, MeanScoreTable};
use crate::Question;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("top_n must be at least 1")]
    TopN,
    #[error("ranked work {0} is missing from the corpus")]
    UnknownWork(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

/// Keyword counts over a slice of the ranked list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordReport {
    /// Descending by count, then alphabetical.
    pub counts: Vec<(String, usize)>,
    pub selection: String,
    pub n_works: usize,
    /// Set when fewer than `top_n` works were available.
    pub truncated: bool,
}

impl KeywordReport {
    pub fn count(&self, keyword: &str) -> Option<usize> {
        self.counts.iter().find(|(k, _)| k == keyword).map(|(_, c)| *c)
    }
}

/// Counts lower-cased keywords once per work over the first `top_n` ranked
/// entries. Controls are skipped unless `include_controls`.
pub fn keyword_frequency(
    ranked: &RankedList,
    works: &[WorkRecord],
    top_n: usize,
    include_controls: bool,
) -> Result<KeywordReport, ReportError> {
    if top_n == 0 {
        return Err(ReportError::TopN);
    }
    let lookup: HashMap<&str, &WorkRecord> = works.iter().map(|w| (w.work_id.as_str(), w)).collect();
    let selected: Vec<&str> = ranked
        .entries
        .iter()
        .filter(|e| include_controls || !e.is_control)
        .take(top_n)
        .map(|e| e.work_id.as_str())
        .collect();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for id in &selected {
        let work = lookup.get(id).ok_or_else(|| ReportError::UnknownWork(id.to_string()))?;
        let mut seen: Vec<String> = work.keywords.iter().map(|k| k.trim().to_lowercase()).collect();
        seen.sort();
        seen.dedup();
        for keyword in seen.into_iter().filter(|k| !k.is_empty()) {
            *counts.entry(keyword).or_insert(0) += 1;
        }
    }
    let mut counts: Vec<(String, usize)> = counts.into_iter().collect();
    counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let truncated = selected.len() < top_n;
    if truncated {
        log::warn!("keyword report asked for {top_n} works, only {} available", selected.len());
    }
    let kind = if include_controls { "entries" } else { "non-control entries" };
    Ok(KeywordReport {
        counts,
        selection: format!("top {top_n} ranked {kind}"),
        n_works: selected.len(),
        truncated,
    })
}

fn write_file(path: &Path, text: &str) -> Result<usize, ReportError> {
    let io = |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::write(path, text).map_err(io)?;
    Ok(text.len())
}

fn to_csv(rows: Vec<Vec<String>>) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(writer.into_inner().expect("writing to memory")).expect("csv of strings is utf-8")
}

/// Header and rows of a CSV file.
fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), ReportError> {
    let format = |message: String| ReportError::Format {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| format(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = reader
        .records()
        .map(|r| {
            r.map(|r| r.iter().map(str::to_string).collect())
                .map_err(|e| format(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    Ok((header, rows))
}

fn parse_field<T: std::str::FromStr>(path: &Path, field: &str, what: &str) -> Result<T, ReportError>
where
    T::Err: std::fmt::Display,
{
    field.parse().map_err(|e: T::Err| ReportError::Format {
        path: path.to_path_buf(),
        message: format!("{what} {field:?}: {e}"),
    })
}

fn expect_header(path: &Path, found: &[String], want: &[String]) -> Result<(), ReportError> {
    if found != want {
        return Err(ReportError::Format {
            path: path.to_path_buf(),
            message: format!("header {found:?}, expected {want:?}"),
        });
    }
    Ok(())
}

fn owned(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// `keyword,count`.
pub fn export_keywords(report: &KeywordReport, path: &Path) -> Result<usize, ReportError> {
    let mut rows = vec![owned(&["keyword", "count"])];
    rows.extend(report.counts.iter().map(|(k, c)| vec![k.clone(), c.to_string()]));
    write_file(path, &to_csv(rows))
}

pub fn import_keywords(path: &Path) -> Result<Vec<(String, usize)>, ReportError> {
    let (header, rows) = read_csv(path)?;
    expect_header(path, &header, &owned(&["keyword", "count"]))?;
    rows.into_iter()
        .map(|r| Ok((r[0].clone(), parse_field(path, &r[1], "count")?)))
        .collect()
}

fn mean_header() -> Vec<String> {
    let mut header = vec!["work_id".to_string()];
    header.extend(Question::ALL.iter().map(|q| q.key().to_lowercase()));
    header.push("raters".into());
    header
}

/// `work_id,q1..q7,raters` with means on the [0, 1] scale.
pub fn export_mean_scores(table: &MeanScoreTable, path: &Path) -> Result<usize, ReportError> {
    let mut rows = vec![mean_header()];
    for ((work, means), raters) in table.works.iter().zip(&table.means).zip(&table.rater_counts) {
        let mut row = vec![work.clone()];
        row.extend(means.iter().map(f64::to_string));
        row.push(raters.to_string());
        rows.push(row);
    }
    write_file(path, &to_csv(rows))
}

/// Reads a mean-score export; the panel identity is not stored in the file
/// and must be supplied.
pub fn import_mean_scores(
    path: &Path,
    source: Source,
    mode: ScoringMode,
    n_raters: usize,
) -> Result<MeanScoreTable, ReportError> {
    let (header, rows) = read_csv(path)?;
    expect_header(path, &header, &mean_header())?;
    let mut table = MeanScoreTable {
        source,
        mode,
        n_raters,
        works: Vec::new(),
        means: Vec::new(),
        rater_counts: Vec::new(),
    };
    for row in rows {
        let mut means = [0.0; 7];
        for (i, m) in means.iter_mut().enumerate() {
            *m = parse_field(path, &row[i + 1], "mean")?;
        }
        table.works.push(row[0].clone());
        table.means.push(means);
        table.rater_counts.push(parse_field(path, &row[8], "raters")?);
    }
    Ok(table)
}

/// Square matrix with a leading `column` label field.
pub fn export_correlation(matrix: &CorrelationMatrix, path: &Path) -> Result<usize, ReportError> {
    let labels: Vec<String> = matrix.labels.iter().map(|l| l.render()).collect();
    let mut header = vec!["column".to_string()];
    header.extend(labels.iter().cloned());
    let mut rows = vec![header];
    for (label, values) in labels.iter().zip(&matrix.values) {
        let mut row = vec![label.clone()];
        row.extend(values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        rows.push(row);
    }
    write_file(path, &to_csv(rows))
}

/// Column labels and cells of a correlation export; `None` marks undefined cells.
pub type CorrelationCells = (Vec<String>, Vec<Vec<Option<f64>>>);

pub fn import_correlation(path: &Path) -> Result<CorrelationCells, ReportError> {
    let (header, rows) = read_csv(path)?;
    let labels: Vec<String> = header.iter().skip(1).cloned().collect();
    let mut values = Vec::new();
    for row in rows {
        let cells = row[1..]
            .iter()
            .map(|c| if c.is_empty() { Ok(None) } else { parse_field(path, c, "correlation").map(Some) })
            .collect::<Result<Vec<_>, _>>()?;
        values.push(cells);
    }
    Ok((labels, values))
}

/// One row per question plus a `Sum` row; one column per compared panel,
/// headed `reference vs other`.
pub fn export_kappa_grid(report: &AgreementReport, path: &Path) -> Result<usize, ReportError> {
    let mut header = owned(&["question", "name"]);
    header.extend(report.kappa.iter().map(|c| format!("{} vs {}", c.reference, c.other)));
    let mut rows = vec![header];
    for q in Question::ALL {
        let mut row = vec![q.key().to_string(), q.short_name().to_string()];
        row.extend(report.kappa.iter().map(|c| c.per_question[&q].kappa.to_string()));
        rows.push(row);
    }
    let mut sum = owned(&["Sum", ""]);
    sum.extend(report.kappa.iter().map(|c| c.sum.to_string()));
    rows.push(sum);
    write_file(path, &to_csv(rows))
}

/// Column headers and per-question kappa values (Q1..Q7) of a kappa grid.
pub fn import_kappa_grid(path: &Path) -> Result<Vec<(String, [f64; 7])>, ReportError> {
    let (header, rows) = read_csv(path)?;
    if rows.len() != 8 || header.len() < 2 {
        return Err(ReportError::Format {
            path: path.to_path_buf(),
            message: "expected 7 question rows and a Sum row".into(),
        });
    }
    let mut columns: Vec<(String, [f64; 7])> = header[2..].iter().map(|h| (h.clone(), [0.0; 7])).collect();
    for (i, row) in rows[..7].iter().enumerate() {
        for (c, column) in columns.iter_mut().enumerate() {
            column.1[i] = parse_field(path, &row[c + 2], "kappa")?;
        }
    }
    Ok(columns)
}

/// `rank,score,is_control`: the score-by-rank curve.
pub fn export_rank_curve(ranked: &RankedList, path: &Path) -> Result<usize, ReportError> {
    let mut rows = vec![owned(&["rank", "score", "is_control"])];
    rows.extend(
        ranked
            .entries
            .iter()
            .map(|e| vec![e.rank.to_string(), e.score.to_string(), e.is_control.to_string()]),
    );
    write_file(path, &to_csv(rows))
}

pub fn import_rank_curve(path: &Path) -> Result<Vec<(usize, f64, bool)>, ReportError> {
    let (header, rows) = read_csv(path)?;
    expect_header(path, &header, &owned(&["rank", "score", "is_control"]))?;
    rows.into_iter()
        .map(|r| {
            Ok((
                parse_field(path, &r[0], "rank")?,
                parse_field(path, &r[1], "score")?,
                parse_field(path, &r[2], "is_control")?,
            ))
        })
        .collect()
}

/// Pretty JSON of any serializable artifact, newline-terminated.
pub fn export_json<T: Serialize>(value: &T, path: &Path) -> Result<usize, ReportError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| ReportError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    write_file(path, &text)
}
