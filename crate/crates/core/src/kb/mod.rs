//! Interval-valued sign templates and the knowledgebase that holds them.
//!
//! The instances of each sign class are clustered (average linkage over the
//! mean per-key-frame distance), the dendrogram is cut at
//! `max(coefficients) − δ·γ`, and each cluster is summarized cellwise by the
//! `[min, max]` of its members.

mod dendrogram;
mod io;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dendrogram::{
    cut, cut_threshold, distance_matrix, inconsistency, instance_distance, linkage, linkage_from_distances,
    validate_delta, Dendrogram, Link, Linkage, ThresholdMode,
};
pub use io::{load_kb, load_kb_file, save_kb, save_kb_file, FORMAT_VERSION};

use crate::dataset::SignInstance;
use crate::keyframe::{KeyframeMatrix, DEFAULT_K};
use crate::spatial::FEATURE_DIM;

/// Name of the similarity measure templates are meant to be scored with.
pub const SIMILARITY_VERSION: &str = "interval-reciprocal-v1";

#[derive(Debug, Error)]
pub enum KbError {
    #[error("key-frame count mismatch: expected {expected}, found {found}")]
    KMismatch { expected: usize, found: usize },
    #[error("no inconsistency coefficients to threshold")]
    EmptyCoefficients,
    #[error("delta {0} outside [0.1, 1.0]")]
    InvalidDelta(f64),
    #[error("inconsistency depth must be >= 1, got {0}")]
    InvalidDepth(usize),
    #[error("cannot aggregate an empty cluster")]
    EmptyCluster,
    #[error("merge {step} at height {height} below previous height {previous}")]
    NonMonotone { step: usize, previous: f64, height: f64 },
    #[error("knowledgebase format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: String, expected: u32 },
    #[error("knowledgebase is truncated: {0}")]
    Truncated(String),
    #[error("knowledgebase checksum mismatch: stored {stored}, computed {computed}")]
    Checksum { stored: String, computed: String },
    #[error("knowledgebase line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

pub type IntervalRow = [Interval; FEATURE_DIM];

/// One cluster representative of one sign class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignTemplate {
    pub label: String,
    pub cluster_id: usize,
    pub rows: Vec<IntervalRow>,
    pub member_count: usize,
    /// Identifiers of the training instances aggregated into this template.
    pub members: Vec<String>,
}

impl SignTemplate {
    pub fn k(&self) -> usize {
        self.rows.len()
    }

    /// Whether every cell of `m` lies inside the corresponding interval.
    pub fn contains(&self, m: &KeyframeMatrix) -> bool {
        m.k() == self.k()
            && self
                .rows
                .iter()
                .zip(&m.rows)
                .all(|(iv, r)| iv.iter().zip(r).all(|(i, v)| i.contains(*v)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    /// One interval template per cluster of instances.
    #[default]
    Symbolic,
    /// One point-interval template per instance.
    Crisp,
}

impl Representation {
    pub fn name(self) -> &'static str {
        match self {
            Representation::Symbolic => "symbolic",
            Representation::Crisp => "crisp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KbParams {
    pub k: usize,
    pub delta: f64,
    pub depth: usize,
    pub linkage: Linkage,
    pub threshold_mode: ThresholdMode,
}

impl Default for KbParams {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            delta: 0.5,
            depth: 2,
            linkage: Linkage::Average,
            threshold_mode: ThresholdMode::GlobalMax,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Knowledgebase {
    pub params: KbParams,
    pub representation: Representation,
    /// Cut threshold per class; `None` for classes with a single instance or
    /// crisp knowledgebases.
    pub class_thresholds: BTreeMap<String, Option<f64>>,
    pub templates: Vec<SignTemplate>,
}

impl Knowledgebase {
    /// Template count per class label.
    pub fn class_counts(&self) -> BTreeMap<&str, usize> {
        let mut out = BTreeMap::new();
        for t in &self.templates {
            *out.entry(t.label.as_str()).or_insert(0) += 1;
        }
        out
    }
}

/// Cellwise `[min, max]` over the members.
pub fn aggregate_intervals(members: &[&KeyframeMatrix]) -> Result<Vec<IntervalRow>, KbError> {
    let first = members.first().ok_or(KbError::EmptyCluster)?;
    let k = first.k();
    let mut rows: Vec<IntervalRow> = first.rows.iter().map(|r| r.map(Interval::point)).collect();
    for m in &members[1..] {
        if m.k() != k {
            return Err(KbError::KMismatch { expected: k, found: m.k() });
        }
        for (iv, r) in rows.iter_mut().zip(&m.rows) {
            for (i, &v) in iv.iter_mut().zip(r) {
                i.lo = i.lo.min(v);
                i.hi = i.hi.max(v);
            }
        }
    }
    Ok(rows)
}

/// Hierarchical clustering of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassClustering {
    pub dendrogram: Dendrogram,
    pub coefficients: Vec<f64>,
    pub threshold: Option<f64>,
    /// Member indices into the clustered slice, ordered by smallest member.
    pub clusters: Vec<Vec<usize>>,
}

pub fn cluster_class(members: &[&KeyframeMatrix], params: &KbParams) -> Result<ClassClustering, KbError> {
    validate_delta(params.delta)?;
    let dendrogram = linkage(members, params.linkage)?;
    let coefficients = inconsistency(&dendrogram, params.depth)?;
    if coefficients.is_empty() {
        let clusters = if members.is_empty() { Vec::new() } else { vec![vec![0]] };
        return Ok(ClassClustering { dendrogram, coefficients, threshold: None, clusters });
    }
    let th = cut_threshold(&coefficients, params.delta, params.threshold_mode)?;
    let clusters = cut(&dendrogram, &coefficients, th);
    Ok(ClassClustering { dendrogram, coefficients, threshold: Some(th), clusters })
}

/// Builds one template per cluster; `clusters` index into `members`.
pub fn templates_from_clusters(
    label: &str,
    members: &[&SignInstance],
    clusters: &[Vec<usize>],
) -> Result<Vec<SignTemplate>, KbError> {
    clusters
        .iter()
        .enumerate()
        .map(|(cluster_id, idx)| {
            let mats: Vec<&KeyframeMatrix> = idx.iter().map(|&i| &members[i].keyframes).collect();
            Ok(SignTemplate {
                label: label.to_owned(),
                cluster_id,
                rows: aggregate_intervals(&mats)?,
                member_count: idx.len(),
                members: idx.iter().map(|&i| members[i].id()).collect(),
            })
        })
        .collect()
}

pub fn group_by_label<'a>(instances: &[&'a SignInstance]) -> BTreeMap<String, Vec<&'a SignInstance>> {
    let mut by_label: BTreeMap<String, Vec<&SignInstance>> = BTreeMap::new();
    for inst in instances {
        by_label.entry(inst.label.clone()).or_default().push(inst);
    }
    by_label
}

fn check_k(instances: &[&SignInstance], k: usize) -> Result<(), KbError> {
    match instances.iter().find(|i| i.keyframes.k() != k) {
        Some(bad) => Err(KbError::KMismatch { expected: k, found: bad.keyframes.k() }),
        None => Ok(()),
    }
}

/// Clusters each class of `training` and summarizes every cluster as an
/// interval template.
pub fn build_knowledgebase(training: &[&SignInstance], params: &KbParams) -> Result<Knowledgebase, KbError> {
    validate_delta(params.delta)?;
    check_k(training, params.k)?;
    let by_label = group_by_label(training);
    let per_class: Vec<(String, Option<f64>, Vec<SignTemplate>)> = by_label
        .par_iter()
        .map(|(label, members)| {
            let mats: Vec<&KeyframeMatrix> = members.iter().map(|m| &m.keyframes).collect();
            let cc = cluster_class(&mats, params)?;
            let templates = templates_from_clusters(label, members, &cc.clusters)?;
            Ok((label.clone(), cc.threshold, templates))
        })
        .collect::<Result<_, KbError>>()?;

    let mut class_thresholds = BTreeMap::new();
    let mut templates = Vec::new();
    for (label, th, ts) in per_class {
        class_thresholds.insert(label, th);
        templates.extend(ts);
    }
    Ok(Knowledgebase { params: *params, representation: Representation::Symbolic, class_thresholds, templates })
}

/// Stores every training instance as its own point-interval template.
pub fn build_crisp_knowledgebase(training: &[&SignInstance], params: &KbParams) -> Result<Knowledgebase, KbError> {
    check_k(training, params.k)?;
    let mut class_thresholds = BTreeMap::new();
    let mut templates = Vec::with_capacity(training.len());
    for (label, members) in group_by_label(training) {
        for (cluster_id, m) in members.iter().enumerate() {
            templates.push(SignTemplate {
                label: label.clone(),
                cluster_id,
                rows: aggregate_intervals(&[&m.keyframes])?,
                member_count: 1,
                members: vec![m.id()],
            });
        }
        class_thresholds.insert(label, None);
    }
    Ok(Knowledgebase { params: *params, representation: Representation::Crisp, class_thresholds, templates })
}
