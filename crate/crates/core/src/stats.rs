//! Agreement statistics between rater panels.
//!
//! Panels are first reduced to per-work mean scores on [0, 1]
//! ([`mean_scores`]). Cohen's kappa compares two panels question by question
//! after majority binarization; Pearson correlation compares every
//! (panel, question) column against every other.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::evaluator::{EvaluationDataset, ScoringMode, Source};
use crate::Question;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset holds several sources; split it first")]
    MultipleSources,
    #[error("vectors have lengths {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 observations, got {0}")]
    TooShort(usize),
    #[error("kappa needs binary labels, found {0}")]
    NonBinary(u8),
    #[error("tables cover different works")]
    WorkSetMismatch,
    #[error("no tables given")]
    NoTables,
}

/// Per-work mean score for each question, normalized to [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanScoreTable {
    pub source: Source,
    pub mode: ScoringMode,
    /// Distinct raters in the panel.
    pub n_raters: usize,
    pub works: Vec<String>,
    /// One row per entry of `works`, indexed by question.
    pub means: Vec<[f64; 7]>,
    /// Raters present for each work.
    pub rater_counts: Vec<usize>,
}

impl MeanScoreTable {
    /// Column label such as `llm_context` or `llm_context/scalar10`.
    pub fn label(&self) -> String {
        match self.mode {
            ScoringMode::Binary => self.source.to_string(),
            ScoringMode::Scalar10 => format!("{}/{}", self.source, self.mode),
        }
    }

    pub fn position(&self, work_id: &str) -> Option<usize> {
        self.works.iter().position(|w| w == work_id)
    }

    pub fn get(&self, work_id: &str, question: Question) -> Option<f64> {
        self.position(work_id).map(|i| self.means[i][question.index()])
    }

    pub fn column(&self, question: Question) -> Vec<f64> {
        self.means.iter().map(|row| row[question.index()]).collect()
    }

    fn index(&self) -> HashMap<&str, usize> {
        self.works
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_str(), i))
            .collect()
    }

    /// Rows reordered to follow `works`. Fails unless both cover the same set.
    fn aligned_to(&self, works: &[String]) -> Result<Vec<[f64; 7]>, StatsError> {
        if works.len() != self.works.len() {
            return Err(StatsError::WorkSetMismatch);
        }
        let index = self.index();
        works
            .iter()
            .map(|w| index.get(w.as_str()).map(|&i| self.means[i]))
            .collect::<Option<Vec<_>>>()
            .ok_or(StatsError::WorkSetMismatch)
    }
}

/// Averages each question over the raters present for each work. Scalar
/// scores are divided by 10. Works nobody rated are dropped with a warning.
pub fn mean_scores(dataset: &EvaluationDataset) -> Result<MeanScoreTable, StatsError> {
    let sources = dataset.sources();
    let source = match sources.as_slice() {
        [] => return Err(StatsError::EmptyDataset),
        [one] => *one,
        _ => return Err(StatsError::MultipleSources),
    };
    let mode = dataset.mode().ok_or(StatsError::EmptyDataset)?;
    let mut sums: HashMap<&str, ([f64; 7], usize)> = HashMap::new();
    for r in dataset.records() {
        let entry = sums.entry(r.work_id.as_str()).or_insert(([0.0; 7], 0));
        for q in Question::ALL {
            entry.0[q.index()] += f64::from(r.scores.get(q));
        }
        entry.1 += 1;
    }
    let mut works = Vec::new();
    let mut means = Vec::new();
    let mut rater_counts = Vec::new();
    for work in dataset.works() {
        match sums.get(work.as_str()) {
            Some((sum, n)) => {
                let mut row = [0.0; 7];
                for q in Question::ALL {
                    let mean = sum[q.index()] / *n as f64;
                    row[q.index()] = match mode {
                        ScoringMode::Binary => mean,
                        ScoringMode::Scalar10 => mean / 10.0,
                    };
                }
                works.push(work.clone());
                means.push(row);
                rater_counts.push(*n);
            }
            None => log::warn!("work {work} has no ratings from {source}; excluded"),
        }
    }
    Ok(MeanScoreTable {
        source,
        mode,
        n_raters: dataset.raters_per_source().get(&source).copied().unwrap_or(0),
        works,
        means,
        rater_counts,
    })
}

/// 1 where the mean is at least 0.5, else 0. Ties go to 1.
pub fn majority_binarize(table: &MeanScoreTable) -> BTreeMap<String, [u8; 7]> {
    table
        .works
        .iter()
        .zip(&table.means)
        .map(|(w, row)| (w.clone(), row.map(binarize_mean)))
        .collect()
}

pub fn binarize_mean(mean: f64) -> u8 {
    u8::from(mean >= 0.5)
}

/// Cohen's kappa with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub kappa: f64,
    /// Observed agreement.
    pub observed: f64,
    /// Agreement expected by chance.
    pub expected: f64,
    /// Both raters constant: kappa is a convention (1 when they agree,
    /// -1 when they do not), not an estimate.
    pub degenerate: bool,
}

/// Chance-corrected agreement between two aligned binary label vectors.
pub fn cohens_kappa(a: &[u8], b: &[u8]) -> Result<Kappa, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(StatsError::TooShort(n));
    }
    if let Some(&bad) = a.iter().chain(b).find(|&&v| v > 1) {
        return Err(StatsError::NonBinary(bad));
    }
    let nf = n as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64;
    let pa = a.iter().filter(|&&v| v == 1).count() as f64 / nf;
    let pb = b.iter().filter(|&&v| v == 1).count() as f64 / nf;
    let observed = agree / nf;
    let expected = pa * pb + (1.0 - pa) * (1.0 - pb);
    let a_constant = pa == 0.0 || pa == 1.0;
    let b_constant = pb == 0.0 || pb == 1.0;
    if a_constant && b_constant {
        let kappa = if observed == 1.0 { 1.0 } else { -1.0 };
        return Ok(Kappa {
            kappa,
            observed,
            expected,
            degenerate: true,
        });
    }
    let kappa = ((observed - expected) / (1.0 - expected)).clamp(-1.0, 1.0);
    Ok(Kappa {
        kappa,
        observed,
        expected,
        degenerate: false,
    })
}

/// Product-moment correlation; `None` when either input has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(StatsError::TooShort(n));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (xi, yi) in x.iter().zip(y) {
        let (dx, dy) = (xi - mx, yi - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}

/// A `(table label, question)` column of a correlation matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnLabel {
    pub source: String,
    pub question: Question,
}

impl ColumnLabel {
    pub fn render(&self) -> String {
        format!("{}:{}", self.source, self.question)
    }
}

/// Symmetric matrix of Pearson coefficients. `None` marks pairs involving a
/// zero-variance column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<ColumnLabel>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i][j]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Labels of columns with zero variance.
    pub fn undefined_columns(&self) -> Vec<String> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(i, _)| self.values[*i][*i].is_none())
            .map(|(_, l)| l.render())
            .collect()
    }
}

/// Pearson correlation between every pair of (table, question) columns,
/// over works aligned to the first table's order.
pub fn correlation_matrix(tables: &[MeanScoreTable]) -> Result<CorrelationMatrix, StatsError> {
    let first = tables.first().ok_or(StatsError::NoTables)?;
    let reference: HashSet<&str> = first.works.iter().map(String::as_str).collect();
    let mut labels = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for table in tables {
        if table.works.iter().any(|w| !reference.contains(w.as_str())) {
            return Err(StatsError::WorkSetMismatch);
        }
        let rows = table.aligned_to(&first.works)?;
        for q in Question::ALL {
            labels.push(ColumnLabel {
                source: table.label(),
                question: q,
            });
            columns.push(rows.iter().map(|r| r[q.index()]).collect());
        }
    }
    let k = columns.len();
    let mut values = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            let r = if i == j {
                pearson(&columns[i], &columns[i])?.map(|_| 1.0)
            } else {
                pearson(&columns[i], &columns[j])?
            };
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix { labels, values })
}

/// Kappa of one panel against the reference panel, per question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaColumn {
    pub reference: String,
    pub other: String,
    pub per_question: BTreeMap<Question, Kappa>,
    pub sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub kappa: Vec<KappaColumn>,
    pub correlation: CorrelationMatrix,
}

/// Compares every table after the first against the first (kappa on
/// majority-binarized labels) and correlates all columns.
pub fn agreement_report(tables: &[MeanScoreTable]) -> Result<AgreementReport, StatsError> {
    let reference = tables.first().ok_or(StatsError::NoTables)?;
    let ref_labels = majority_binarize(reference);
    let mut kappa = Vec::new();
    for other in &tables[1..] {
        let other_rows = other.aligned_to(&reference.works)?;
        let mut per_question = BTreeMap::new();
        for q in Question::ALL {
            let a: Vec<u8> = reference.works.iter().map(|w| ref_labels[w][q.index()]).collect();
            let b: Vec<u8> = other_rows.iter().map(|r| binarize_mean(r[q.index()])).collect();
            per_question.insert(q, cohens_kappa(&a, &b)?);
        }
        let sum = per_question.values().map(|k| k.kappa).sum();
        kappa.push(KappaColumn {
            reference: reference.label(),
            other: other.label(),
            per_question,
            sum,
        });
    }
    Ok(AgreementReport {
        kappa,
        correlation: correlation_matrix(tables)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::{EvaluationRecord, ScoreVector};

    fn dataset(mode: ScoringMode, rows: &[(&str, &str, [u8; 7])]) -> EvaluationDataset {
        let mut works: Vec<String> = Vec::new();
        for (w, _, _) in rows {
            if !works.iter().any(|x| x == w) {
                works.push(w.to_string());
            }
        }
        let records = rows
            .iter()
            .map(|(w, r, v)| EvaluationRecord {
                work_id: w.to_string(),
                rater_id: r.to_string(),
                source: Source::Human,
                scores: ScoreVector::new(mode, *v).unwrap(),
                raw_response: None,
            })
            .collect();
        EvaluationDataset::new(works, records).unwrap()
    }

    fn q1(v: u8) -> [u8; 7] {
        [v, 0, 0, 0, 0, 0, 0]
    }

    #[test]
    fn binary_mean_is_fraction_of_yes() {
        let rows: Vec<_> = [1, 1, 1, 0, 0, 0]
            .iter()
            .enumerate()
            .map(|(i, v)| ("W1", ["a", "b", "c", "d", "e", "f"][i], q1(*v)))
            .collect();
        let t = mean_scores(&dataset(ScoringMode::Binary, &rows)).unwrap();
        assert_eq!(t.get("W1", Question::Q1), Some(0.5));
        assert_eq!(t.n_raters, 6);
    }

    #[test]
    fn scalar_mean_divided_by_ten() {
        let t = mean_scores(&dataset(ScoringMode::Scalar10, &[("W1", "run1", [7, 1, 1, 1, 1, 1, 10])])).unwrap();
        assert_eq!(t.get("W1", Question::Q1), Some(0.7));
        assert_eq!(t.get("W1", Question::Q7), Some(1.0));
    }

    #[test]
    fn absent_raters_leave_denominator() {
        let mut rows: Vec<_> = ["a", "b", "c", "d", "e", "f"]
            .iter()
            .map(|r| ("W1", *r, q1(1)))
            .collect();
        rows.push(("W2", "a", q1(1)));
        rows.push(("W2", "b", q1(1)));
        rows.push(("W2", "c", q1(1)));
        rows.push(("W2", "d", q1(1)));
        rows.push(("W2", "e", q1(0)));
        let t = mean_scores(&dataset(ScoringMode::Binary, &rows)).unwrap();
        assert_eq!(t.get("W2", Question::Q1), Some(0.8));
        assert_eq!(t.rater_counts, vec![6, 5]);
    }

    #[test]
    fn unrated_works_dropped() {
        let ds = EvaluationDataset::new(
            vec!["W1".into(), "W2".into()],
            vec![EvaluationRecord {
                work_id: "W1".into(),
                rater_id: "a".into(),
                source: Source::Human,
                scores: ScoreVector::new(ScoringMode::Binary, q1(1)).unwrap(),
                raw_response: None,
            }],
        )
        .unwrap();
        assert_eq!(mean_scores(&ds).unwrap().works, vec!["W1"]);
    }

    #[test]
    fn majority_tie_goes_to_one() {
        assert_eq!(binarize_mean(0.5), 1);
        assert_eq!(binarize_mean(0.49), 0);
        assert_eq!(binarize_mean(1.0), 1);
        assert_eq!(binarize_mean(0.0), 0);
    }

    #[test]
    fn kappa_hand_cases() {
        let a = [1, 0, 1, 1, 0];
        assert_eq!(cohens_kappa(&a, &a).unwrap().kappa, 1.0);
        let k = cohens_kappa(&[1, 1, 0, 0], &[0, 0, 1, 1]).unwrap();
        assert_eq!((k.observed, k.expected, k.kappa), (0.0, 0.5, -1.0));
        let k = cohens_kappa(&[1, 1, 1, 0, 0, 0, 1, 0, 1, 1], &[1, 1, 0, 0, 0, 0, 1, 0, 1, 1]).unwrap();
        assert!((k.observed - 0.9).abs() < 1e-15);
        assert!((k.expected - 0.5).abs() < 1e-15);
        assert!((k.kappa - 0.8).abs() < 1e-12);
    }

    #[test]
    fn kappa_degenerate_conventions() {
        let k = cohens_kappa(&[1, 1, 1], &[1, 1, 1]).unwrap();
        assert!(k.degenerate && k.kappa == 1.0);
        let k = cohens_kappa(&[1, 1, 1], &[0, 0, 0]).unwrap();
        assert!(k.degenerate && k.kappa == -1.0);
        let k = cohens_kappa(&[1, 1, 1, 1], &[1, 0, 1, 1]).unwrap();
        assert!(!k.degenerate);
    }

    #[test]
    fn kappa_errors() {
        assert_eq!(cohens_kappa(&[1, 0], &[1]), Err(StatsError::LengthMismatch(2, 1)));
        assert_eq!(cohens_kappa(&[1], &[1]), Err(StatsError::TooShort(1)));
        assert_eq!(cohens_kappa(&[1, 2], &[1, 0]), Err(StatsError::NonBinary(2)));
    }

    #[test]
    fn pearson_hand_cases() {
        let x = [1.0, 2.0, 5.0, 3.0];
        assert!((pearson(&x, &x).unwrap().unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), Some(-1.0));
        let r = pearson(&[1.0, 0.0, 1.0, 0.0], &[1.0, 0.0, 0.0, 0.0]).unwrap().unwrap();
        assert!((r - 0.5 / (1.0f64 * 0.75).sqrt()).abs() < 1e-12);
        assert!((r - 0.5774).abs() < 1e-4);
        assert_eq!(pearson(&[1.0, 1.0], &[0.0, 1.0]).unwrap(), None);
    }

    fn table(label_source: Source, works: &[&str], rows: Vec<[f64; 7]>) -> MeanScoreTable {
        MeanScoreTable {
            source: label_source,
            mode: ScoringMode::Binary,
            n_raters: 1,
            works: works.iter().map(|s| s.to_string()).collect(),
            rater_counts: vec![1; rows.len()],
            means: rows,
        }
    }

    #[test]
    fn matrix_shape_and_constructed_equality() {
        let rows = vec![
            [0.1, 0.2, 0.9, 0.4, 0.5, 0.1, 0.7],
            [0.8, 0.4, 0.1, 0.3, 0.1, 0.8, 0.2],
            [0.5, 0.9, 0.3, 0.8, 0.6, 0.5, 0.3],
            [0.3, 0.1, 0.6, 0.2, 0.9, 0.3, 0.9],
        ];
        let t = table(Source::Human, &["A", "B", "C", "D"], rows);
        let m = correlation_matrix(std::slice::from_ref(&t)).unwrap();
        assert_eq!(m.len(), 7);
        for i in 0..7 {
            assert_eq!(m.get(i, i), Some(1.0));
            for j in 0..7 {
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
        assert!((m.get(0, 5).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_tables_mirror_blocks() {
        let rows = vec![
            [0.1, 0.2, 0.9, 0.4, 0.5, 0.1, 0.7],
            [0.8, 0.4, 0.1, 0.3, 0.1, 0.6, 0.2],
            [0.5, 0.9, 0.3, 0.8, 0.6, 0.5, 0.3],
        ];
        let a = table(Source::Human, &["A", "B", "C"], rows.clone());
        // Same data in another order: alignment must be by work id.
        let b = table(Source::LlmContext, &["C", "A", "B"], vec![rows[2], rows[0], rows[1]]);
        let m = correlation_matrix(&[a, b]).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                let within = m.get(i, j).unwrap();
                assert!((m.get(i, 7 + j).unwrap() - within).abs() < 1e-12);
                assert!((m.get(7 + i, 7 + j).unwrap() - within).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_column_is_flagged() {
        let a = table(Source::Human, &["A", "B", "C"], vec![[1.0, 0.0, 0.5, 0.1, 0.2, 0.3, 0.4], [1.0, 1.0, 0.2, 0.3, 0.2, 0.1, 0.0], [1.0, 0.5, 0.9, 0.2, 0.7, 0.3, 0.6]]);
        let m = correlation_matrix(&[a]).unwrap();
        assert_eq!(m.get(0, 0), None);
        assert_eq!(m.get(0, 3), None);
        assert_eq!(m.undefined_columns(), vec!["human:Q1"]);
    }

    #[test]
    fn mismatched_work_sets_rejected() {
        let a = table(Source::Human, &["A", "B"], vec![[0.0; 7], [1.0; 7]]);
        let b = table(Source::LlmContext, &["A", "C"], vec![[0.0; 7], [1.0; 7]]);
        assert_eq!(correlation_matrix(&[a.clone(), b.clone()]), Err(StatsError::WorkSetMismatch));
        assert_eq!(agreement_report(&[a, b]).unwrap_err(), StatsError::WorkSetMismatch);
    }

    #[test]
    fn report_has_seven_kappas_per_pair() {
        let rows = vec![[1.0, 0.0, 0.5, 0.0, 1.0, 0.5, 0.0], [0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0], [0.5, 0.5, 1.0, 0.0, 0.0, 1.0, 1.0]];
        let a = table(Source::Human, &["A", "B", "C"], rows.clone());
        let b = table(Source::LlmContext, &["A", "B", "C"], rows);
        let report = agreement_report(&[a, b]).unwrap();
        assert_eq!(report.kappa.len(), 1);
        assert_eq!(report.kappa[0].per_question.len(), 7);
        assert!(report.kappa[0].per_question.values().all(|k| k.kappa == 1.0));
        assert_eq!(report.kappa[0].sum, 7.0);
    }
}
