//! Symbolic similarity between crisp test signs and interval templates, and
//! nearest-neighbor recognition over a knowledgebase.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{Interval, Knowledgebase, SignTemplate};
use crate::keyframe::KeyframeMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum RecognizeError {
    #[error("length mismatch: template row has {expected} features, test has {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("interval {index} has lower bound {lo} above upper bound {hi}")]
    InvertedInterval { index: usize, lo: f64, hi: f64 },
    #[error("key-frame count mismatch: expected {expected}, found {found}")]
    KMismatch { expected: usize, found: usize },
    #[error("knowledgebase has no templates")]
    EmptyKnowledgebase,
}

#[inline]
fn contribution(iv: &Interval, v: f64) -> f64 {
    if iv.lo <= v && v <= iv.hi {
        1.0
    } else {
        (1.0 / (1.0 + (iv.lo - v).abs())).max(1.0 / (1.0 + (iv.hi - v).abs()))
    }
}

/// Mean over features of: 1 when the value lies in its interval, otherwise
/// the larger of `1/(1 + |bound − value|)` over the two bounds.
pub fn frame_similarity(rf: &[Interval], tf: &[f64]) -> Result<f64, RecognizeError> {
    if rf.len() != tf.len() {
        return Err(RecognizeError::LengthMismatch { expected: rf.len(), found: tf.len() });
    }
    if let Some((index, iv)) = rf.iter().enumerate().find(|(_, iv)| iv.lo.partial_cmp(&iv.hi).is_none_or(|o| o.is_gt())) {
        return Err(RecognizeError::InvertedInterval { index, lo: iv.lo, hi: iv.hi });
    }
    Ok(frame_similarity_unchecked(rf, tf))
}

fn frame_similarity_unchecked(rf: &[Interval], tf: &[f64]) -> f64 {
    let sum: f64 = rf.iter().zip(tf).map(|(iv, &v)| contribution(iv, v)).sum();
    sum / rf.len() as f64
}

/// Sum of per-key-frame similarities over aligned key frames.
pub fn total_similarity(template: &SignTemplate, test: &KeyframeMatrix) -> Result<f64, RecognizeError> {
    if template.k() != test.k() {
        return Err(RecognizeError::KMismatch { expected: template.k(), found: test.k() });
    }
    let mut total = 0.0;
    for (rf, tf) in template.rows.iter().zip(&test.rows) {
        total += frame_similarity(rf, tf)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Prediction {
    Label(String),
    Rejected,
}

impl Prediction {
    pub fn label(&self) -> Option<&str> {
        match self {
            Prediction::Label(l) => Some(l),
            Prediction::Rejected => None,
        }
    }
}

impl std::fmt::Display for Prediction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Prediction::Label(l) => f.write_str(l),
            Prediction::Rejected => f.write_str("<rejected>"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTemplate {
    pub template: usize,
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionResult {
    pub predicted: Prediction,
    pub best_score: f64,
    /// All templates by descending score; equal scores by (label, template id).
    pub ranked: Vec<RankedTemplate>,
    /// Number of templates sharing the best score.
    pub ties: usize,
}

/// Scores every template and predicts the label of the best one. With a
/// reject threshold, a best score below it yields [`Prediction::Rejected`].
pub fn recognize(
    kb: &Knowledgebase,
    test: &KeyframeMatrix,
    reject_threshold: Option<f64>,
) -> Result<RecognitionResult, RecognizeError> {
    if kb.templates.is_empty() {
        return Err(RecognizeError::EmptyKnowledgebase);
    }
    if test.k() != kb.params.k {
        return Err(RecognizeError::KMismatch { expected: kb.params.k, found: test.k() });
    }
    let mut ranked: Vec<RankedTemplate> = kb
        .templates
        .iter()
        .enumerate()
        .map(|(i, t)| {
            Ok(RankedTemplate { template: i, label: t.label.clone(), score: total_similarity(t, test)? })
        })
        .collect::<Result<_, RecognizeError>>()?;
    ranked.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.label.cmp(&b.label))
            .then(a.template.cmp(&b.template))
    });
    let best = &ranked[0];
    let best_score = best.score;
    let ties = ranked.iter().take_while(|r| r.score == best_score).count();
    let predicted = match reject_threshold {
        Some(th) if best_score < th => Prediction::Rejected,
        _ => Prediction::Label(best.label.clone()),
    };
    Ok(RecognitionResult { predicted, best_score, ranked, ties })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{KbParams, Representation};
    use crate::spatial::FEATURE_DIM;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn point_row(v: [f64; FEATURE_DIM]) -> [Interval; FEATURE_DIM] {
        v.map(Interval::point)
    }

    fn template(label: &str, rows: Vec<[Interval; FEATURE_DIM]>) -> SignTemplate {
        SignTemplate { label: label.into(), cluster_id: 0, member_count: 1, members: vec![], rows }
    }

    fn kb(templates: Vec<SignTemplate>, k: usize) -> Knowledgebase {
        Knowledgebase {
            params: KbParams { k, ..Default::default() },
            representation: Representation::Symbolic,
            class_thresholds: BTreeMap::new(),
            templates,
        }
    }

    #[test]
    fn contained_values_score_one() {
        let rf = [Interval { lo: 0.0, hi: 2.0 }; FEATURE_DIM];
        assert_eq!(frame_similarity(&rf, &[1.0; FEATURE_DIM]).unwrap(), 1.0);
        // inclusive bounds
        assert_eq!(frame_similarity(&rf, &[2.0; FEATURE_DIM]).unwrap(), 1.0);
    }

    #[test]
    fn one_unit_outside_a_point_interval() {
        let v = [3.0; FEATURE_DIM];
        let mut tf = v;
        tf[2] += 1.0;
        let s = frame_similarity(&point_row(v), &tf).unwrap();
        assert!((s - 13.0 / 14.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let rf = [Interval { lo: 0.0, hi: 1.0 }; 3];
        assert!(matches!(frame_similarity(&rf, &[0.0; 2]), Err(RecognizeError::LengthMismatch { .. })));
        let bad = [Interval { lo: 2.0, hi: 1.0 }];
        assert!(matches!(frame_similarity(&bad, &[0.0]), Err(RecognizeError::InvertedInterval { .. })));
        assert_eq!(
            recognize(&kb(vec![], 1), &KeyframeMatrix::from_rows(vec![[0.0; 7]]), None),
            Err(RecognizeError::EmptyKnowledgebase)
        );
        let k = kb(vec![template("A", vec![point_row([0.0; 7])])], 1);
        assert!(matches!(
            recognize(&k, &KeyframeMatrix::from_rows(vec![[0.0; 7]; 2]), None),
            Err(RecognizeError::KMismatch { .. })
        ));
    }

    #[test]
    fn perfect_and_half_matches() {
        let rows: Vec<[f64; 7]> = (0..40).map(|j| [j as f64; 7]).collect();
        let t = template("A", rows.iter().map(|r| point_row(*r)).collect());
        let test = KeyframeMatrix::from_rows(rows.clone());
        assert_eq!(total_similarity(&t, &test).unwrap(), 40.0);
        let off = KeyframeMatrix::from_rows(rows.iter().map(|r| r.map(|v| v + 1.0)).collect());
        assert_eq!(total_similarity(&t, &off).unwrap(), 20.0);
    }

    #[test]
    fn single_template_and_rejection() {
        let k = kb(vec![template("only", vec![point_row([1.0; 7]); 2])], 2);
        let test = KeyframeMatrix::from_rows(vec![[50.0; 7]; 2]);
        let r = recognize(&k, &test, None).unwrap();
        assert_eq!(r.predicted, Prediction::Label("only".into()));
        let r = recognize(&k, &test, Some(3.0)).unwrap();
        assert_eq!(r.predicted, Prediction::Rejected);
    }

    #[test]
    fn ties_reported_and_broken_by_label() {
        let row = point_row([1.0; 7]);
        let k = kb(vec![template("B", vec![row]), template("A", vec![row]), template("C", vec![point_row([9.0; 7])])], 1);
        let r = recognize(&k, &KeyframeMatrix::from_rows(vec![[1.0; 7]]), None).unwrap();
        assert_eq!(r.ties, 2);
        assert_eq!(r.predicted, Prediction::Label("A".into()));
        assert_eq!(r.ranked[0].template, 1);
        assert!(r.ranked.windows(2).all(|w| w[0].score >= w[1].score));
    }

    fn arb_case() -> impl Strategy<Value = (Vec<(f64, f64)>, Vec<f64>)> {
        (
            proptest::collection::vec((-100.0f64..100.0, 0.0f64..20.0), FEATURE_DIM),
            proptest::collection::vec(-150.0f64..150.0, FEATURE_DIM),
        )
    }

    proptest! {
        #[test]
        fn similarity_properties((bounds, tf) in arb_case(), widen in 0.0f64..5.0, push in 0.0f64..50.0) {
            let rf: Vec<Interval> = bounds.iter().map(|&(lo, w)| Interval { lo, hi: lo + w }).collect();
            let s = frame_similarity(&rf, &tf).unwrap();
            prop_assert!(s > 0.0 && s <= 1.0);
            let inside = rf.iter().zip(&tf).all(|(i, v)| i.contains(*v));
            prop_assert_eq!(s == 1.0, inside);

            // widening never lowers similarity
            let wide: Vec<Interval> = rf.iter().map(|i| Interval { lo: i.lo - widen, hi: i.hi + widen }).collect();
            prop_assert!(frame_similarity(&wide, &tf).unwrap() >= s);

            // moving a value further outside never raises similarity
            let farther: Vec<f64> = rf.iter().zip(&tf).map(|(i, &v)| {
                if v > i.hi { v + push } else if v < i.lo { v - push } else { v }
            }).collect();
            prop_assert!(frame_similarity(&rf, &farther).unwrap() <= s);
        }

        #[test]
        fn template_order_only_matters_for_ties(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut ts = Vec::new();
            for t in 0..6 {
                let rows = (0..3).map(|_| std::array::from_fn(|_| {
                    let lo = rng.random_range(0.0..10.0);
                    Interval { lo, hi: lo + rng.random_range(0.0..2.0) }
                })).collect();
                ts.push(template(&format!("L{t}"), rows));
            }
            let test = KeyframeMatrix::from_rows((0..3).map(|_| std::array::from_fn(|_| rng.random_range(0.0..10.0))).collect());
            let a = recognize(&kb(ts.clone(), 3), &test, None).unwrap();
            ts.reverse();
            let b = recognize(&kb(ts, 3), &test, None).unwrap();
            prop_assert_eq!(a.predicted, b.predicted);
            prop_assert_eq!(a.best_score, b.best_score);
        }
    }
}
