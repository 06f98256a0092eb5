//! Two-stage ranking of evaluated works.
//!
//! Works first pass a threshold on their mean Q1 (mitigation) score. The
//! remaining questions Q2..Q7 are weighted by ridge-penalized logistic
//! regression of "is a positive control" on the mean scores, with the
//! coefficients normalized to sum to one. Works are ranked by the weighted
//! sum, ties broken by work id and reported as tie groups.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::{self, File};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::stats::MeanScoreTable;
use crate::Question;

pub const DEFAULT_Q1_THRESHOLD: f64 = 0.6;
pub const DEFAULT_RIDGE_LAMBDA: f64 = 1e-3;

#[derive(Debug, thiserror::Error)]
pub enum RankError {
    #[error("threshold {0} outside [0, 1]")]
    Threshold(f64),
    #[error("feature schema mismatch: {0}")]
    Schema(String),
    #[error("labels are all {0}; logistic fit needs both classes")]
    DegenerateLabels(u8),
    #[error("ridge lambda must be finite and non-negative, got {0}")]
    Lambda(f64),
    #[error("coefficients sum to {0:e}; weights cannot be normalized")]
    Normalization(f64),
    #[error("no convergence after {iterations} iterations (gradient norm {gradient_norm:e})")]
    Convergence {
        iterations: usize,
        gradient_norm: f64,
        beta0: f64,
        beta: BTreeMap<Question, f64>,
    },
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
}

/// Mean scores of one work on Q2..Q7 plus its training label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub work_id: String,
    pub features: BTreeMap<Question, f64>,
    /// 1 for positive controls.
    pub label: u8,
}

fn check_features(work_id: &str, features: &BTreeMap<Question, f64>) -> Result<(), RankError> {
    let keys: Vec<Question> = features.keys().copied().collect();
    if keys != Question::FEATURES {
        return Err(RankError::Schema(format!(
            "work {work_id} has features {keys:?}, expected Q2..Q7"
        )));
    }
    if let Some((q, v)) = features.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(RankError::Schema(format!("work {work_id}: {q} = {v} outside [0, 1]")));
    }
    Ok(())
}

/// Q2..Q7 means keyed by work.
pub fn feature_map(table: &MeanScoreTable) -> BTreeMap<String, BTreeMap<Question, f64>> {
    table
        .works
        .iter()
        .zip(&table.means)
        .map(|(w, row)| {
            let features = Question::FEATURES.iter().map(|&q| (q, row[q.index()])).collect();
            (w.clone(), features)
        })
        .collect()
}

/// One training row per work in `table`; controls are labeled 1, all other
/// works 0.
pub fn feature_rows(table: &MeanScoreTable, controls: &HashSet<String>) -> Vec<FeatureRow> {
    table
        .works
        .iter()
        .zip(&table.means)
        .map(|(w, row)| FeatureRow {
            work_id: w.clone(),
            features: Question::FEATURES.iter().map(|&q| (q, row[q.index()])).collect(),
            label: u8::from(controls.contains(w)),
        })
        .collect()
}

/// Works whose mean Q1 score is at least `threshold`.
pub fn q1_filter(table: &MeanScoreTable, threshold: f64) -> Result<BTreeSet<String>, RankError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(RankError::Threshold(threshold));
    }
    Ok(table
        .works
        .iter()
        .zip(&table.means)
        .filter(|(_, row)| row[Question::Q1.index()] >= threshold)
        .map(|(w, _)| w.clone())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Convergence threshold on the Euclidean norm of the penalized gradient.
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-8,
        }
    }
}

/// Fitted logistic coefficients and the ranking weights derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub beta0: f64,
    pub beta: BTreeMap<Question, f64>,
    /// `beta[q] / sum(beta)`; may be negative.
    pub weights: BTreeMap<Question, f64>,
    pub ridge_lambda: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub n_positive: usize,
    pub n_negative: usize,
}

impl WeightVector {
    pub fn save(&self, path: &Path) -> Result<(), RankError> {
        let err = |message: String| RankError::File {
            path: path.to_path_buf(),
            message,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| err(e.to_string()))?;
        }
        let mut text = serde_json::to_string_pretty(self).map_err(|e| err(e.to_string()))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, RankError> {
        let err = |message: String| RankError::File {
            path: path.to_path_buf(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        // Key sets are checked where the weights are used.
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }

    /// Probability of being a positive control under the fitted model.
    pub fn probability(&self, features: &BTreeMap<Question, f64>) -> f64 {
        let eta = self.beta0
            + self
                .beta
                .iter()
                .map(|(q, b)| b * features.get(q).copied().unwrap_or(0.0))
                .sum::<f64>();
        sigmoid(eta)
    }
}

fn check_weight_keys(weights: &BTreeMap<Question, f64>) -> Result<(), RankError> {
    let keys: Vec<Question> = weights.keys().copied().collect();
    if keys != Question::FEATURES {
        return Err(RankError::Schema(format!("weights for {keys:?}, expected Q2..Q7")));
    }
    Ok(())
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^eta)` without overflow.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

/// Log-likelihood minus `lambda/2 * |beta|^2`, intercept unpenalized.
/// `coef[0]` is the intercept.
pub fn penalized_log_likelihood(x: &[Vec<f64>], y: &[u8], coef: &[f64], lambda: f64) -> f64 {
    let ll: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &label)| {
            let eta = coef[0] + row.iter().zip(&coef[1..]).map(|(a, b)| a * b).sum::<f64>();
            f64::from(label) * eta - softplus(eta)
        })
        .sum();
    ll - 0.5 * lambda * coef[1..].iter().map(|b| b * b).sum::<f64>()
}

struct Problem {
    design: DMatrix<f64>,
    y: DVector<f64>,
    lambda: f64,
}

impl Problem {
    fn objective(&self, coef: &DVector<f64>) -> f64 {
        let eta = &self.design * coef;
        let ll: f64 = eta
            .iter()
            .zip(self.y.iter())
            .map(|(e, y)| y * e - softplus(*e))
            .sum();
        ll - 0.5 * self.lambda * coef.rows(1, coef.len() - 1).norm_squared()
    }

    fn gradient_and_hessian(&self, coef: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let eta = &self.design * coef;
        let p = eta.map(sigmoid);
        let w = p.map(|pi| pi * (1.0 - pi));
        let mut grad = self.design.transpose() * (&self.y - &p);
        let mut weighted = self.design.clone();
        for (mut row, wi) in weighted.row_iter_mut().zip(w.iter()) {
            row *= *wi;
        }
        let mut hess = self.design.transpose() * weighted;
        for j in 1..coef.len() {
            grad[j] -= self.lambda * coef[j];
            hess[(j, j)] += self.lambda;
        }
        (grad, hess)
    }
}

/// Maximizes the ridge-penalized log-likelihood of `P(label = 1)` over the
/// Q2..Q7 features by damped Newton (IRLS) steps with a backtracking line
/// search, falling back to a gradient step when the Hessian is singular.
pub fn fit_logistic(
    rows: &[FeatureRow],
    ridge_lambda: f64,
    options: FitOptions,
) -> Result<WeightVector, RankError> {
    let fit = fit_coefficients(rows, ridge_lambda, options)?;
    let weights = normalize_weights(&fit.beta)?;
    Ok(WeightVector {
        beta0: fit.beta0,
        beta: fit.beta,
        weights,
        ridge_lambda,
        iterations: fit.iterations,
        gradient_norm: fit.gradient_norm,
        n_positive: fit.n_positive,
        n_negative: fit.n_negative,
    })
}

/// Raw penalized maximum-likelihood coefficients, before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub beta0: f64,
    pub beta: BTreeMap<Question, f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub n_positive: usize,
    pub n_negative: usize,
}

/// The optimization behind [`fit_logistic`]; succeeds even when the
/// coefficients sum to zero and cannot be normalized.
pub fn fit_coefficients(
    rows: &[FeatureRow],
    ridge_lambda: f64,
    options: FitOptions,
) -> Result<LogisticFit, RankError> {
    if !ridge_lambda.is_finite() || ridge_lambda < 0.0 {
        return Err(RankError::Lambda(ridge_lambda));
    }
    for row in rows {
        check_features(&row.work_id, &row.features)?;
        if row.label > 1 {
            return Err(RankError::Schema(format!("work {} has label {}", row.work_id, row.label)));
        }
    }
    let n_positive = rows.iter().filter(|r| r.label == 1).count();
    let n_negative = rows.len() - n_positive;
    if n_positive == 0 || n_negative == 0 {
        let only = rows.first().map(|r| r.label).unwrap_or(0);
        return Err(RankError::DegenerateLabels(only));
    }

    let k = Question::FEATURES.len() + 1;
    let design = DMatrix::from_fn(rows.len(), k, |i, j| {
        if j == 0 {
            1.0
        } else {
            rows[i].features[&Question::FEATURES[j - 1]]
        }
    });
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| f64::from(r.label)));
    let problem = Problem {
        design,
        y,
        lambda: ridge_lambda,
    };

    let mut coef = DVector::zeros(k);
    let mut value = problem.objective(&coef);
    let mut iterations = 0;
    let mut gradient_norm;
    loop {
        let (grad, hess) = problem.gradient_and_hessian(&coef);
        gradient_norm = grad.norm();
        if gradient_norm <= options.tol {
            break;
        }
        if iterations >= options.max_iter {
            let beta = Question::FEATURES
                .iter()
                .enumerate()
                .map(|(i, &q)| (q, coef[i + 1]))
                .collect();
            return Err(RankError::Convergence {
                iterations,
                gradient_norm,
                beta0: coef[0],
                beta,
            });
        }
        iterations += 1;
        let direction = match hess.cholesky() {
            Some(chol) => chol.solve(&grad),
            None => grad.clone(),
        };
        let slope = grad.dot(&direction);
        // Near the optimum objective changes drop below rounding noise; allow
        // for it so full Newton steps are still taken there.
        let noise = 1e-12 * value.abs().max(1.0);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let candidate = &coef + &direction * step;
            let candidate_value = problem.objective(&candidate);
            if candidate_value >= value + 1e-4 * step * slope - noise {
                coef = candidate;
                value = candidate_value;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No ascent possible at working precision; treat the current
            // point as the optimum if the gradient is close, else give up.
            let (grad, _) = problem.gradient_and_hessian(&coef);
            gradient_norm = grad.norm();
            if gradient_norm <= options.tol {
                break;
            }
            let beta = Question::FEATURES
                .iter()
                .enumerate()
                .map(|(i, &q)| (q, coef[i + 1]))
                .collect();
            return Err(RankError::Convergence {
                iterations,
                gradient_norm,
                beta0: coef[0],
                beta,
            });
        }
    }

    let beta: BTreeMap<Question, f64> = Question::FEATURES
        .iter()
        .enumerate()
        .map(|(i, &q)| (q, coef[i + 1]))
        .collect();
    Ok(LogisticFit {
        beta0: coef[0],
        beta,
        iterations,
        gradient_norm,
        n_positive,
        n_negative,
    })
}

/// Scales coefficients so they sum to one, keeping signs relative to the sum.
pub fn normalize_weights(beta: &BTreeMap<Question, f64>) -> Result<BTreeMap<Question, f64>, RankError> {
    let sum: f64 = beta.values().sum();
    if !sum.is_finite() || sum.abs() <= 1e-12 {
        return Err(RankError::Normalization(sum));
    }
    Ok(beta.iter().map(|(q, b)| (*q, b / sum)).collect())
}

/// `sum(weights[q] * features[q])` over matching keys.
pub fn weighted_score(
    features: &BTreeMap<Question, f64>,
    weights: &BTreeMap<Question, f64>,
) -> Result<f64, RankError> {
    if !features.keys().eq(weights.keys()) {
        return Err(RankError::Schema(format!(
            "feature keys {:?} do not match weight keys {:?}",
            features.keys().collect::<Vec<_>>(),
            weights.keys().collect::<Vec<_>>()
        )));
    }
    Ok(features.iter().map(|(q, f)| weights[q] * f).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    /// 1-based position.
    pub rank: usize,
    pub work_id: String,
    pub score: f64,
    /// 1-based id shared by entries with identical scores.
    pub tie_group: usize,
    pub is_control: bool,
}

/// Works in descending score order, ties broken by ascending work id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub entries: Vec<RankedEntry>,
    pub q1_threshold: f64,
    /// Ranks of control works, ascending.
    pub control_positions: Vec<usize>,
    pub tie_group_sizes: BTreeMap<usize, usize>,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Pairs of entries sharing a score.
    pub fn tied_pairs(&self) -> usize {
        self.tie_group_sizes.values().map(|s| s * (s - 1) / 2).sum()
    }

    /// Size of the tie group at rank 1, zero when empty.
    pub fn top_tie_size(&self) -> usize {
        self.entries
            .first()
            .map(|e| self.tie_group_sizes[&e.tie_group])
            .unwrap_or(0)
    }

    /// Writes `rank,work_id,score,tie_group,is_control`.
    pub fn save_csv(&self, path: &Path) -> Result<(), RankError> {
        let err = |message: String| RankError::File {
            path: path.to_path_buf(),
            message,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| err(e.to_string()))?;
        }
        let file = File::create(path).map_err(|e| err(e.to_string()))?;
        let mut writer = csv::Writer::from_writer(file);
        writer
            .write_record(["rank", "work_id", "score", "tie_group", "is_control"])
            .map_err(|e| err(e.to_string()))?;
        for e in &self.entries {
            writer
                .write_record([
                    e.rank.to_string(),
                    e.work_id.clone(),
                    e.score.to_string(),
                    e.tie_group.to_string(),
                    e.is_control.to_string(),
                ])
                .map_err(|e| err(e.to_string()))?;
        }
        writer.flush().map_err(|e| err(e.to_string()))
    }

    /// Reads a file written by [`save_csv`](Self::save_csv).
    pub fn load_csv(path: &Path, q1_threshold: f64) -> Result<Self, RankError> {
        let err = |message: String| RankError::File {
            path: path.to_path_buf(),
            message,
        };
        let file = File::open(path).map_err(|e| err(e.to_string()))?;
        let mut reader = csv::Reader::from_reader(file);
        let mut entries = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| err(e.to_string()))?;
            let field = |i: usize| row.get(i).ok_or_else(|| err(format!("short row {row:?}")));
            entries.push(RankedEntry {
                rank: field(0)?.parse().map_err(|e| err(format!("rank: {e}")))?,
                work_id: field(1)?.to_string(),
                score: field(2)?.parse().map_err(|e| err(format!("score: {e}")))?,
                tie_group: field(3)?.parse().map_err(|e| err(format!("tie_group: {e}")))?,
                is_control: field(4)?.parse().map_err(|e| err(format!("is_control: {e}")))?,
            });
        }
        let mut tie_group_sizes = BTreeMap::new();
        for e in &entries {
            *tie_group_sizes.entry(e.tie_group).or_insert(0) += 1;
        }
        let control_positions = entries.iter().filter(|e| e.is_control).map(|e| e.rank).collect();
        Ok(Self {
            entries,
            q1_threshold,
            control_positions,
            tie_group_sizes,
        })
    }
}

/// Scores and orders the passed works.
pub fn rank(
    passed: &BTreeSet<String>,
    features: &BTreeMap<String, BTreeMap<Question, f64>>,
    weights: &BTreeMap<Question, f64>,
    controls: &HashSet<String>,
    q1_threshold: f64,
) -> Result<RankedList, RankError> {
    let mut scored = Vec::with_capacity(passed.len());
    for work in passed {
        let f = features
            .get(work)
            .ok_or_else(|| RankError::Schema(format!("no features for work {work}")))?;
        scored.push((work.clone(), weighted_score(f, weights)?));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut entries = Vec::with_capacity(scored.len());
    let mut tie_group_sizes = BTreeMap::new();
    let mut group = 0;
    let mut previous: Option<f64> = None;
    for (i, (work_id, score)) in scored.into_iter().enumerate() {
        if previous != Some(score) {
            group += 1;
            previous = Some(score);
        }
        *tie_group_sizes.entry(group).or_insert(0) += 1;
        entries.push(RankedEntry {
            rank: i + 1,
            is_control: controls.contains(&work_id),
            work_id,
            score,
            tie_group: group,
        });
    }
    let control_positions = entries.iter().filter(|e| e.is_control).map(|e| e.rank).collect();
    Ok(RankedList {
        entries,
        q1_threshold,
        control_positions,
        tie_group_sizes,
    })
}

/// Filter on Q1 and rank the survivors of one mean-score table.
pub fn rank_table(
    table: &MeanScoreTable,
    weights: &WeightVector,
    q1_threshold: f64,
    controls: &HashSet<String>,
) -> Result<RankedList, RankError> {
    check_weight_keys(&weights.weights)?;
    let passed = q1_filter(table, q1_threshold)?;
    rank(&passed, &feature_map(table), &weights.weights, controls, q1_threshold)
}

/// Plain-text summary of Q1 passes and control positions.
pub fn summarize(list: &RankedList, n_works: usize, n_controls: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} of {} works passed the Q1 filter (threshold {})",
        list.len(),
        n_works,
        list.q1_threshold
    );
    let positions: Vec<String> = list.control_positions.iter().map(|p| p.to_string()).collect();
    let _ = writeln!(
        out,
        "{} of {} positive controls passed, ranked at positions {}",
        list.control_positions.len(),
        n_controls,
        if positions.is_empty() { "-".to_string() } else { positions.join(", ") }
    );
    let _ = writeln!(
        out,
        "{} works share the top score; {} tied pairs overall",
        list.top_tie_size(),
        list.tied_pairs()
    );
    out
}
