use std::collections::{BTreeMap, BTreeSet, HashSet};

use climscan_core::evaluator::{ScoringMode, Source};
use climscan_core::openalex::{filter_works, invert_abstract, reconstruct_abstract, RawWork, TopicRef, TopicWhitelist};
use climscan_core::ranking::{
    fit_coefficients, fit_logistic, normalize_weights, penalized_log_likelihood, q1_filter, rank, FeatureRow, FitOptions,
};
use climscan_core::stats::MeanScoreTable;
use climscan_core::Question;
use proptest::prelude::*;

const TOPICS: [&str; 6] = ["T1", "T2", "T3", "T4", "T5", "T6"];

fn raw_work(i: usize, has_abstract: bool, topics: &[usize]) -> RawWork {
    RawWork {
        openalex_id: format!("W{i}"),
        title: format!("work {i}"),
        abstract_inverted_index: has_abstract.then(|| invert_abstract("some words here")),
        publication_year: 2010,
        work_type: "article".into(),
        topics: topics
            .iter()
            .map(|&t| TopicRef {
                topic_id: TOPICS[t].into(),
                subfield_id: "1".into(),
                domain_id: "3".into(),
            })
            .collect(),
        keywords: vec![],
        corresponding_institutions: vec![],
    }
}

fn works_strategy() -> impl Strategy<Value = Vec<RawWork>> {
    prop::collection::vec((any::<bool>(), prop::collection::vec(0..TOPICS.len(), 0..=4)), 0..40).prop_map(|specs| {
        specs
            .iter()
            .enumerate()
            .map(|(i, (a, t))| raw_work(i, *a, t))
            .collect()
    })
}

fn whitelist(mask: u8) -> TopicWhitelist {
    TopicWhitelist::new(TOPICS.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, t)| *t)).unwrap()
}

fn table(rows: &[[f64; 7]]) -> MeanScoreTable {
    MeanScoreTable {
        source: Source::LlmContext,
        mode: ScoringMode::Binary,
        n_raters: 1,
        works: (0..rows.len()).map(|i| format!("W{i:03}")).collect(),
        means: rows.to_vec(),
        rater_counts: vec![1; rows.len()],
    }
}

fn unit_rows(max: usize) -> impl Strategy<Value = Vec<[f64; 7]>> {
    prop::collection::vec(prop::array::uniform7(0u8..=10).prop_map(|a| a.map(|v| v as f64 / 10.0)), 0..max)
}

fn beta_map(values: &[f64]) -> BTreeMap<Question, f64> {
    Question::FEATURES.iter().copied().zip(values.iter().copied()).collect()
}

proptest! {
    #[test]
    fn reconstruct_inverts_invert(words in prop::collection::vec("[A-Za-z0-9,.()-]{1,12}", 1..60)) {
        let text = words.join(" ");
        prop_assert_eq!(reconstruct_abstract(&invert_abstract(&text)).unwrap(), text);
    }

    #[test]
    fn filter_is_idempotent(works in works_strategy(), mask in 1u8..64) {
        let wl = whitelist(mask);
        let once = filter_works(&works, &wl);
        prop_assert_eq!(filter_works(&once, &wl), once.clone());
        // Order preserved and input untouched.
        let positions: Vec<usize> = once.iter().map(|w| works.iter().position(|x| x == w).unwrap()).collect();
        prop_assert!(positions.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn filter_shrinks_with_whitelist(works in works_strategy(), mask in 1u8..64, drop in 0usize..6) {
        let smaller = mask & !(1 << drop);
        prop_assume!(smaller != 0);
        let big: HashSet<String> = filter_works(&works, &whitelist(mask)).into_iter().map(|w| w.openalex_id).collect();
        let small: HashSet<String> = filter_works(&works, &whitelist(smaller)).into_iter().map(|w| w.openalex_id).collect();
        prop_assert!(small.is_subset(&big));
    }

    #[test]
    fn q1_filter_monotone_in_threshold(rows in unit_rows(30), a in 0u8..=10, b in 0u8..=10) {
        let t = table(&rows);
        let (lo, hi) = (a.min(b) as f64 / 10.0, a.max(b) as f64 / 10.0);
        let loose = q1_filter(&t, lo).unwrap();
        let strict = q1_filter(&t, hi).unwrap();
        prop_assert!(strict.is_subset(&loose));
        prop_assert_eq!(q1_filter(&t, 0.0).unwrap().len(), rows.len());
    }

    #[test]
    fn rank_orders_exactly_the_passed_works(rows in unit_rows(30), raw in prop::array::uniform6(0.05f64..1.0)) {
        let t = table(&rows);
        let weights = normalize_weights(&beta_map(&raw)).unwrap();
        let passed = q1_filter(&t, 0.6).unwrap();
        let features = climscan_core::ranking::feature_map(&t);
        let list = rank(&passed, &features, &weights, &HashSet::new(), 0.6).unwrap();
        let ids: BTreeSet<String> = list.entries.iter().map(|e| e.work_id.clone()).collect();
        prop_assert_eq!(&ids, &passed);
        for (i, pair) in list.entries.windows(2).enumerate() {
            prop_assert!(pair[0].score >= pair[1].score);
            prop_assert_eq!(pair[0].rank, i + 1);
            prop_assert_eq!(pair[0].tie_group == pair[1].tie_group, pair[0].score == pair[1].score);
        }
        let sizes: usize = list.tie_group_sizes.values().sum();
        prop_assert_eq!(sizes, list.len());
    }

    #[test]
    fn normalization_ignores_beta_scale(raw in prop::array::uniform6(-3.0f64..3.0), scale in prop_oneof![0.01f64..100.0, -100.0f64..-0.01]) {
        let sum: f64 = raw.iter().sum();
        prop_assume!(sum.abs() > 0.05);
        let w = normalize_weights(&beta_map(&raw)).unwrap();
        let scaled: Vec<f64> = raw.iter().map(|b| b * scale).collect();
        let ws = normalize_weights(&beta_map(&scaled)).unwrap();
        prop_assert!((w.values().sum::<f64>() - 1.0).abs() < 1e-9);
        for q in Question::FEATURES {
            prop_assert!((w[&q] - ws[&q]).abs() < 1e-9 * (1.0 + w[&q].abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fit_is_a_stationary_maximum(
        data in prop::collection::vec((prop::array::uniform6(0u8..=10), any::<bool>()), 12..60),
        lambda in prop_oneof![Just(1e-3), Just(1e-2), Just(1.0)],
    ) {
        prop_assume!(data.iter().any(|d| d.1) && data.iter().any(|d| !d.1));
        let rows: Vec<FeatureRow> = data
            .iter()
            .enumerate()
            .map(|(i, (f, y))| FeatureRow {
                work_id: format!("W{i}"),
                features: beta_map(&f.map(|v| v as f64 / 10.0)),
                label: *y as u8,
            })
            .collect();
        let fit = match fit_coefficients(&rows, lambda, FitOptions::default()) {
            Ok(fit) => fit,
            // Near-separable draws at tiny lambda may legitimately need more steps.
            Err(_) if lambda < 1e-2 => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let x: Vec<Vec<f64>> = rows.iter().map(|r| r.features.values().copied().collect()).collect();
        let y: Vec<u8> = rows.iter().map(|r| r.label).collect();
        let mut coef = vec![fit.beta0];
        coef.extend(fit.beta.values());
        let best = penalized_log_likelihood(&x, &y, &coef, lambda);
        prop_assert!(best >= penalized_log_likelihood(&x, &y, &[0.0; 7], lambda) - 1e-12);
        for j in 0..7 {
            for h in [1e-3, -1e-3] {
                let mut c = coef.clone();
                c[j] += h;
                prop_assert!(best >= penalized_log_likelihood(&x, &y, &c, lambda) - 1e-10);
            }
        }
        if let Ok(w) = normalize_weights(&fit.beta) {
            prop_assert!((w.values().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

fn toy_rows() -> Vec<FeatureRow> {
    [(0.9, 1), (0.8, 1), (0.2, 0), (0.1, 0)]
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| FeatureRow {
            work_id: format!("T{i}"),
            features: beta_map(&[x, 0.0, 0.0, 0.0, 0.0, 0.0]),
            label: y,
        })
        .collect()
}

#[test]
fn toy_fit_orders_probabilities_with_x() {
    let fit = fit_logistic(&toy_rows(), 1e-3, FitOptions::default()).unwrap();
    let b1 = fit.beta[&Question::Q2];
    assert!(b1 > 0.0);
    let p: Vec<f64> = toy_rows().iter().map(|r| fit.probability(&r.features)).collect();
    assert!(p.windows(2).all(|w| w[0] > w[1]), "{p:?}");
}

#[test]
fn weaker_ridge_gives_larger_coefficients() {
    let strong = fit_logistic(&toy_rows(), 0.1, FitOptions::default()).unwrap();
    let weak = fit_logistic(&toy_rows(), 1e-3, FitOptions::default()).unwrap();
    let mut previous = 0.0;
    for lambda in [1.0, 0.3, 0.1, 0.03, 0.01, 3e-3, 1e-3] {
        let b = fit_logistic(&toy_rows(), lambda, FitOptions::default()).unwrap().beta[&Question::Q2];
        assert!(b > previous, "lambda {lambda}: {b} <= {previous}");
        previous = b;
    }
    assert!(weak.beta[&Question::Q2].abs() > strong.beta[&Question::Q2].abs());
}

#[test]
fn identical_class_distributions_give_zero_coefficients() {
    // Every feature vector appears once with each label.
    let mut rng_state = 0x9e3779b97f4a7c15u64;
    let mut next = || {
        rng_state ^= rng_state << 13;
        rng_state ^= rng_state >> 7;
        rng_state ^= rng_state << 17;
        (rng_state % 11) as f64 / 10.0
    };
    let mut rows = Vec::new();
    for i in 0..50 {
        let f: Vec<f64> = (0..6).map(|_| next()).collect();
        for label in [0, 1] {
            rows.push(FeatureRow {
                work_id: format!("S{i}-{label}"),
                features: beta_map(&f),
                label,
            });
        }
    }
    let fit = fit_coefficients(&rows, 1e-3, FitOptions::default()).unwrap();
    for (q, b) in &fit.beta {
        assert!(b.abs() < 0.01, "{q}: {b}");
    }
    assert!(fit.beta0.abs() < 0.01);
    // Nothing to normalize.
    assert!(fit_logistic(&rows, 1e-3, FitOptions::default()).is_err());
}
