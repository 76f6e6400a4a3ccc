//! Experimental protocols: per-cluster holdout, generalized k-fold and
//! leave-one-out over crisp templates, and leave-one-signer-out.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::SignInstance;
use crate::kb::{build_crisp_knowledgebase, build_knowledgebase, cluster_class, group_by_label, KbError, KbParams, Knowledgebase};
use crate::keyframe::KeyframeMatrix;
use crate::recognizer::{recognize, Prediction, RecognizeError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("split ratio {train}:{test} does not sum to 100")]
    BadRatio { train: u32, test: u32 },
    #[error("class {0:?} has no instances")]
    EmptyClass(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("trials must be at least 1")]
    ZeroTrials,
    #[error("k = {k} exceeds the {available} instances of class {label:?}")]
    FoldTooLarge { k: usize, label: String, available: usize },
    #[error("k must be at least 1")]
    ZeroFold,
    #[error("need at least 2 signers, found {0}")]
    TooFewSigners(usize),
    #[error("training set is empty")]
    EmptyTraining,
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error("recognizing {instance}: {source}")]
    Recognize { instance: String, source: RecognizeError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatio {
    pub train: u32,
    pub test: u32,
}

impl SplitRatio {
    pub const fn new(train: u32, test: u32) -> Self {
        Self { train, test }
    }

    pub fn validate(self) -> Result<(), EvalError> {
        if self.train + self.test != 100 {
            return Err(EvalError::BadRatio { train: self.train, test: self.test });
        }
        Ok(())
    }

    /// Training share of a cluster of `n`, rounded up.
    pub fn train_count(self, n: usize) -> usize {
        (n * self.train as usize).div_ceil(100)
    }
}

impl std::fmt::Display for SplitRatio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.train, self.test)
    }
}

impl std::str::FromStr for SplitRatio {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("expected TRAIN:TEST, got {s:?}"))?;
        let r = SplitRatio {
            train: a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?,
            test: b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?,
        };
        r.validate().map_err(|e| e.to_string())?;
        Ok(r)
    }
}

/// Rows are true classes, columns predicted classes plus a rejected column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub rejected: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let n = labels.len();
        Self { labels, counts: vec![vec![0; n]; n], rejected: vec![0; n] }
    }

    pub fn from_counts(labels: Vec<String>, counts: Vec<Vec<u64>>) -> Self {
        let n = labels.len();
        assert!(counts.len() == n && counts.iter().all(|r| r.len() == n), "counts must be square");
        Self { labels, counts, rejected: vec![0; n] }
    }

    fn index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Panics if a label is not among the matrix labels.
    pub fn record(&mut self, truth: &str, predicted: &Prediction) {
        let i = self.index(truth).unwrap_or_else(|| panic!("unknown true label {truth:?}"));
        match predicted {
            Prediction::Label(p) => {
                let j = self.index(p).unwrap_or_else(|| panic!("unknown predicted label {p:?}"));
                self.counts[i][j] += 1;
            }
            Prediction::Rejected => self.rejected[i] += 1,
        }
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum::<u64>() + self.rejected[i]
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    pub fn total(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.row_sum(i)).sum()
    }

    pub fn to_grid(&self) -> String {
        let has_rej = self.rejected.iter().any(|&r| r > 0);
        let mut header: Vec<String> = vec!["true\\pred".into()];
        header.extend(self.labels.iter().cloned());
        if has_rej {
            header.push("rejected".into());
        }
        let mut rows = vec![header];
        for (i, l) in self.labels.iter().enumerate() {
            let mut r = vec![l.clone()];
            r.extend(self.counts[i].iter().map(|c| c.to_string()));
            if has_rej {
                r.push(self.rejected[i].to_string());
            }
            rows.push(r);
        }
        let widths: Vec<usize> =
            (0..rows[0].len()).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for r in &rows {
            let cells: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
            out.push_str(cells.join(" ").trim_end());
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let quote = |s: &str| {
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.to_owned()
            }
        };
        let mut out = String::from("true");
        for l in &self.labels {
            out.push(',');
            out.push_str(&quote(l));
        }
        out.push_str(",rejected\n");
        for (i, l) in self.labels.iter().enumerate() {
            out.push_str(&quote(l));
            for c in &self.counts[i] {
                let _ = write!(out, ",{c}");
            }
            let _ = writeln!(out, ",{}", self.rejected[i]);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FScores {
    pub per_class: Vec<f64>,
    pub macro_f: f64,
}

/// Per-class F1 and their unweighted mean. Undefined ratios count as 0.
pub fn f_measure(cm: &ConfusionMatrix) -> FScores {
    let per_class: Vec<f64> = (0..cm.labels.len())
        .map(|i| {
            let tp = cm.counts[i][i] as f64;
            let (col, row) = (cm.col_sum(i), cm.row_sum(i));
            if col == 0 || row == 0 {
                return 0.0;
            }
            let p = tp / col as f64;
            let r = tp / row as f64;
            if p + r == 0.0 {
                0.0
            } else {
                2.0 * p * r / (p + r)
            }
        })
        .collect();
    let macro_f = mean(&per_class);
    FScores { per_class, macro_f }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub protocol: String,
    pub ratio: Option<SplitRatio>,
    pub seed: u64,
    /// Fold index, or held-out signer position.
    pub fold: Option<usize>,
    pub held_out_signer: Option<String>,
    pub train_count: usize,
    pub test_count: usize,
    pub template_count: usize,
    /// F1 per class that had test instances and training data.
    pub per_class_f: BTreeMap<String, f64>,
    pub macro_f: f64,
    /// Classes left out of the macro average for lack of training or test data.
    pub excluded_classes: Vec<String>,
    pub confusion: ConfusionMatrix,
}

impl TrialReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

pub fn summarize(values: &[f64]) -> Summary {
    let m = mean(values);
    let var = if values.is_empty() {
        0.0
    } else {
        values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64
    };
    Summary { mean: m, std: var.sqrt(), n: values.len() }
}

pub fn summarize_reports(reports: &[TrialReport]) -> Summary {
    summarize(&reports.iter().map(|r| r.macro_f).collect::<Vec<_>>())
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4} ± {:.4} (n={})", self.mean, self.std, self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalParams {
    pub kb: KbParams,
    pub reject_threshold: Option<f64>,
}

/// Splits every cluster into training and test indices. Each cluster holds
/// indices into the caller's instance list; the train share is rounded up and
/// singleton clusters train only.
pub fn split_within_clusters(
    clusters: &[Vec<usize>],
    ratio: SplitRatio,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    ratio.validate()?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in clusters {
        let mut members = c.clone();
        members.shuffle(rng);
        let n_train = if members.len() == 1 { 1 } else { ratio.train_count(members.len()) };
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

fn all_labels(data: &[SignInstance]) -> Vec<String> {
    data.iter().map(|d| d.label.clone()).collect::<BTreeSet<_>>().into_iter().collect()
}

fn predict_all(kb: &Knowledgebase, data: &[SignInstance], test: &[usize], reject: Option<f64>) -> Result<Vec<Prediction>, EvalError> {
    test.par_iter()
        .map(|&i| {
            recognize(kb, &data[i].keyframes, reject)
                .map(|r| r.predicted)
                .map_err(|source| EvalError::Recognize { instance: data[i].id(), source })
        })
        .collect()
}

struct TrialSpec<'a> {
    protocol: &'a str,
    ratio: Option<SplitRatio>,
    seed: u64,
    fold: Option<usize>,
    held_out_signer: Option<String>,
}

fn score_trial(
    spec: TrialSpec<'_>,
    data: &[SignInstance],
    labels: &[String],
    train: &[usize],
    test: &[usize],
    crisp: bool,
    params: &EvalParams,
) -> Result<TrialReport, EvalError> {
    if train.is_empty() {
        return Err(EvalError::EmptyTraining);
    }
    let refs: Vec<&SignInstance> = train.iter().map(|&i| &data[i]).collect();
    let kb = if crisp { build_crisp_knowledgebase(&refs, &params.kb)? } else { build_knowledgebase(&refs, &params.kb)? };
    let predictions = predict_all(&kb, data, test, params.reject_threshold)?;
    let mut cm = ConfusionMatrix::new(labels.to_vec());
    for (&i, p) in test.iter().zip(&predictions) {
        cm.record(&data[i].label, p);
    }
    let scores = f_measure(&cm);
    let trained: BTreeSet<&str> = refs.iter().map(|r| r.label.as_str()).collect();
    let mut per_class_f = BTreeMap::new();
    let mut excluded = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        if cm.row_sum(i) > 0 && trained.contains(l.as_str()) {
            per_class_f.insert(l.clone(), scores.per_class[i]);
        } else {
            excluded.push(l.clone());
        }
    }
    let macro_f = mean(&per_class_f.values().copied().collect::<Vec<_>>());
    Ok(TrialReport {
        protocol: spec.protocol.to_owned(),
        ratio: spec.ratio,
        seed: spec.seed,
        fold: spec.fold,
        held_out_signer: spec.held_out_signer,
        train_count: train.len(),
        test_count: test.len(),
        template_count: kb.templates.len(),
        per_class_f,
        macro_f,
        excluded_classes: excluded,
        confusion: cm,
    })
}

/// Clusters every class of the full dataset, then per trial splits each
/// cluster by `ratio`, rebuilds the knowledgebase from the training share and
/// recognizes the rest. Trial `t` uses seed `seed + t`.
pub fn run_holdout(
    data: &[SignInstance],
    params: &EvalParams,
    ratio: SplitRatio,
    trials: usize,
    seed: u64,
) -> Result<Vec<TrialReport>, EvalError> {
    ratio.validate()?;
    if trials == 0 {
        return Err(EvalError::ZeroTrials);
    }
    if data.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let labels = all_labels(data);
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for label in &labels {
        let idx: Vec<usize> = (0..data.len()).filter(|&i| &data[i].label == label).collect();
        let mats: Vec<&KeyframeMatrix> = idx.iter().map(|&i| &data[i].keyframes).collect();
        let cc = cluster_class(&mats, &params.kb)?;
        clusters.extend(cc.clusters.into_iter().map(|c| c.into_iter().map(|j| idx[j]).collect()));
    }
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = seed.wrapping_add(t as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
            let (train, test) = split_within_clusters(&clusters, ratio, &mut rng)?;
            let spec = TrialSpec { protocol: "holdout", ratio: Some(ratio), seed: trial_seed, fold: Some(t), held_out_signer: None };
            score_trial(spec, data, &labels, &train, &test, false, params)
        })
        .collect()
}

/// Generalized k-fold over crisp templates: each fold holds out `k`
/// instances of every class (after a seeded per-class shuffle) and trains on
/// the rest. The number of folds is the smallest `floor(n_class / k)`.
pub fn run_kfold(data: &[SignInstance], params: &EvalParams, k: usize, seed: u64) -> Result<Vec<TrialReport>, EvalError> {
    run_folds(data, params, k, seed, "kfold")
}

/// Leave-one-out: one instance of every class held out per run.
pub fn run_loo(data: &[SignInstance], params: &EvalParams, seed: u64) -> Result<Vec<TrialReport>, EvalError> {
    run_folds(data, params, 1, seed, "loo")
}

fn run_folds(data: &[SignInstance], params: &EvalParams, k: usize, seed: u64, protocol: &str) -> Result<Vec<TrialReport>, EvalError> {
    if k == 0 {
        return Err(EvalError::ZeroFold);
    }
    if data.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let labels = all_labels(data);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_class: Vec<Vec<usize>> = Vec::new();
    for label in &labels {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| &data[i].label == label).collect();
        if idx.len() < k {
            return Err(EvalError::FoldTooLarge { k, label: label.clone(), available: idx.len() });
        }
        idx.shuffle(&mut rng);
        per_class.push(idx);
    }
    let folds = per_class.iter().map(|c| c.len() / k).min().unwrap_or(0);
    (0..folds)
        .into_par_iter()
        .map(|f| {
            let mut train = Vec::new();
            let mut test = Vec::new();
            for c in &per_class {
                for (pos, &i) in c.iter().enumerate() {
                    if pos / k == f {
                        test.push(i);
                    } else {
                        train.push(i);
                    }
                }
            }
            train.sort_unstable();
            test.sort_unstable();
            let spec = TrialSpec { protocol, ratio: None, seed, fold: Some(f), held_out_signer: None };
            score_trial(spec, data, &labels, &train, &test, true, params)
        })
        .collect()
}

/// Leave-one-signer-out with clustered interval templates, one report per
/// signer in sorted order.
pub fn run_signer_independent(data: &[SignInstance], params: &EvalParams) -> Result<Vec<TrialReport>, EvalError> {
    let signers: Vec<String> = data.iter().map(|d| d.signer.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    if signers.len() < 2 {
        return Err(EvalError::TooFewSigners(signers.len()));
    }
    let labels = all_labels(data);
    signers
        .par_iter()
        .enumerate()
        .map(|(f, s)| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| &data[i].signer == s);
            let spec = TrialSpec { protocol: "signer-independent", ratio: None, seed: 0, fold: Some(f), held_out_signer: Some(s.clone()) };
            score_trial(spec, data, &labels, &train, &test, false, params)
        })
        .collect()
}

/// Class sizes, used to reject datasets with an empty class up front.
pub fn class_sizes(data: &[SignInstance]) -> BTreeMap<String, usize> {
    let refs: Vec<&SignInstance> = data.iter().collect();
    group_by_label(&refs).into_iter().map(|(l, v)| (l, v.len())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::FEATURE_DIM;
    use proptest::prelude::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("C{i}")).collect()
    }

    fn inst(label: &str, signer: &str, n: u32, v: f64, k: usize) -> SignInstance {
        SignInstance {
            label: label.into(),
            signer: signer.into(),
            instance: n,
            keyframes: KeyframeMatrix::from_rows(vec![[v; FEATURE_DIM]; k]),
        }
    }

    fn params(k: usize) -> EvalParams {
        EvalParams { kb: KbParams { k, ..Default::default() }, reject_threshold: None }
    }

    #[test]
    fn two_class_f_values() {
        let cm = ConfusionMatrix::from_counts(labels(2), vec![vec![8, 2], vec![3, 7]]);
        let f = f_measure(&cm);
        let p1 = 8.0 / 11.0;
        let r1 = 8.0 / 10.0;
        assert!((f.per_class[0] - 2.0 * p1 * r1 / (p1 + r1)).abs() < 1e-12);
        assert!((f.per_class[0] - 0.762).abs() < 5e-4);
        assert!((f.per_class[1] - 0.737).abs() < 5e-4);
        assert!((f.macro_f - (f.per_class[0] + f.per_class[1]) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_and_degenerate() {
        let cm = ConfusionMatrix::from_counts(labels(3), vec![vec![4, 0, 0], vec![0, 2, 0], vec![0, 0, 9]]);
        let f = f_measure(&cm);
        assert_eq!(f.per_class, vec![1.0; 3]);
        assert_eq!(f.macro_f, 1.0);
        let cm = ConfusionMatrix::from_counts(labels(2), vec![vec![3, 0], vec![2, 0]]);
        assert_eq!(f_measure(&cm).per_class[1], 0.0);
    }

    #[test]
    fn record_and_render() {
        let mut cm = ConfusionMatrix::new(labels(2));
        cm.record("C0", &Prediction::Label("C0".into()));
        cm.record("C0", &Prediction::Rejected);
        cm.record("C1", &Prediction::Label("C0".into()));
        assert_eq!(cm.row_sum(0), 2);
        assert_eq!(cm.total(), 3);
        let grid = cm.to_grid();
        assert!(grid.lines().next().unwrap().ends_with("rejected"));
        assert_eq!(cm.to_csv(), "true,C0,C1,rejected\nC0,1,0,1\nC1,1,0,0\n");
    }

    #[test]
    fn split_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (tr, te) = split_within_clusters(&[(0..10).collect()], SplitRatio::new(60, 40), &mut rng).unwrap();
        assert_eq!((tr.len(), te.len()), (6, 4));
        let (tr, te) = split_within_clusters(&[vec![3]], SplitRatio::new(40, 60), &mut rng).unwrap();
        assert_eq!((tr, te), (vec![3], vec![]));
        let (tr, te) = split_within_clusters(&[(0..5).collect()], SplitRatio::new(50, 50), &mut rng).unwrap();
        assert_eq!((tr.len(), te.len()), (3, 2));
        assert!(split_within_clusters(&[vec![0]], SplitRatio::new(50, 40), &mut rng).is_err());
    }

    #[test]
    fn ratio_parsing() {
        assert_eq!("60:40".parse::<SplitRatio>().unwrap(), SplitRatio::new(60, 40));
        assert!("60:30".parse::<SplitRatio>().is_err());
        assert!("60".parse::<SplitRatio>().is_err());
    }

    #[test]
    fn summary_stats() {
        let s = summarize(&[0.8]);
        assert_eq!((s.mean, s.std), (0.8, 0.0));
        let s = summarize(&[1.0, 3.0]);
        assert_eq!((s.mean, s.std), (2.0, 1.0));
    }

    fn toy(classes: usize, signers: usize, per: u32, k: usize) -> Vec<SignInstance> {
        let mut out = Vec::new();
        for c in 0..classes {
            for s in 0..signers {
                for n in 1..=per {
                    out.push(inst(&format!("C{c}"), &format!("S{s}"), n, 10.0 * c as f64, k));
                }
            }
        }
        out
    }

    #[test]
    fn loo_on_identical_instances_is_perfect() {
        let data = toy(2, 1, 2, 3);
        let reports = run_loo(&data, &params(3), 7).unwrap();
        assert_eq!(reports.len(), 2);
        for r in &reports {
            assert_eq!(r.macro_f, 1.0);
            assert_eq!((r.train_count, r.test_count), (2, 2));
        }
    }

    #[test]
    fn kfold_shapes_and_errors() {
        let data = toy(3, 2, 5, 2);
        let reports = run_kfold(&data, &params(2), 4, 3).unwrap();
        assert_eq!(reports.len(), 2);
        for r in &reports {
            assert_eq!((r.train_count, r.test_count), (18, 12));
            for i in 0..3 {
                assert_eq!(r.confusion.row_sum(i), 4);
            }
        }
        assert!(matches!(run_kfold(&data, &params(2), 11, 3), Err(EvalError::FoldTooLarge { .. })));
        assert!(matches!(run_kfold(&data, &params(2), 0, 3), Err(EvalError::ZeroFold)));
    }

    #[test]
    fn signer_independent_identical_signers() {
        let data = toy(3, 2, 3, 2);
        let reports = run_signer_independent(&data, &params(2)).unwrap();
        assert_eq!(reports.len(), 2);
        assert!(reports.iter().all(|r| r.macro_f == 1.0 && r.test_count == 9));
        assert!(matches!(run_signer_independent(&toy(2, 1, 3, 2), &params(2)), Err(EvalError::TooFewSigners(1))));
    }

    #[test]
    fn signer_independent_excludes_untrained_class() {
        let mut data = toy(2, 2, 2, 2);
        data.push(inst("C9", "S0", 1, 99.0, 2));
        let reports = run_signer_independent(&data, &params(2)).unwrap();
        let s0 = reports.iter().find(|r| r.held_out_signer.as_deref() == Some("S0")).unwrap();
        assert_eq!(s0.excluded_classes, vec!["C9".to_string()]);
        assert!(!s0.per_class_f.contains_key("C9"));
        // the untrained test still lands in some column and costs precision
        assert_eq!(s0.confusion.total() as usize, s0.test_count);
        let s1 = reports.iter().find(|r| r.held_out_signer.as_deref() == Some("S1")).unwrap();
        assert_eq!(s1.excluded_classes, vec!["C9".to_string()]);
        assert_eq!(s1.macro_f, 1.0);
    }

    #[test]
    fn holdout_deterministic_and_disjoint() {
        let mut data = Vec::new();
        for c in 0..3 {
            for n in 0..8u32 {
                data.push(inst(&format!("C{c}"), "S0", n + 1, 20.0 * c as f64 + (n % 2) as f64 * 0.1, 2));
            }
        }
        let a = run_holdout(&data, &params(2), SplitRatio::new(60, 40), 2, 11).unwrap();
        let b = run_holdout(&data, &params(2), SplitRatio::new(60, 40), 2, 11).unwrap();
        assert_eq!(a, b);
        for r in &a {
            assert_eq!(r.train_count + r.test_count, data.len());
            assert_eq!(r.confusion.total() as usize, r.test_count);
        }
        assert!(matches!(run_holdout(&data, &params(2), SplitRatio::new(60, 40), 0, 1), Err(EvalError::ZeroTrials)));
    }

    proptest! {
        #[test]
        fn split_partitions(sizes in proptest::collection::vec(1usize..20, 1..6), train in 1u32..100, seed in 0u64..1000) {
            let mut next = 0;
            let clusters: Vec<Vec<usize>> = sizes.iter().map(|&s| { let c = (next..next + s).collect(); next += s; c }).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (tr, te) = split_within_clusters(&clusters, SplitRatio::new(train, 100 - train), &mut rng).unwrap();
            let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..next).collect::<Vec<_>>());
        }

        #[test]
        fn macro_f_bounded(counts in proptest::collection::vec(proptest::collection::vec(0u64..20, 3), 3)) {
            let f = f_measure(&ConfusionMatrix::from_counts(labels(3), counts));
            prop_assert!((0.0..=1.0).contains(&f.macro_f));
            prop_assert!(f.per_class.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
