//! Reduction of a variable-length frame sequence to exactly K key frames.
//!
//! Frames are clustered with K-means on their feature vectors and each
//! cluster contributes its medoid, the member with the smallest summed
//! Euclidean distance to the rest of the cluster. Sequences shorter than K are
//! padded by cyclic repetition. Ties always go to the smallest frame index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spatial::{FrameFeatures, FEATURE_DIM};

pub type FeatureRow = [f64; FEATURE_DIM];

/// Default number of key frames per sign.
pub const DEFAULT_K: usize = 40;

const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum KeyframeError {
    #[error("no frames to select key frames from")]
    Empty,
    #[error("K must be >= 1")]
    ZeroK,
}

/// K key-frame feature rows in temporal order, with the index of the input
/// frame each row came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyframeMatrix {
    pub rows: Vec<FeatureRow>,
    pub source_indices: Vec<usize>,
}

impl KeyframeMatrix {
    pub fn k(&self) -> usize {
        self.rows.len()
    }

    /// A matrix without frame provenance (indices `0..rows.len()`).
    pub fn from_rows(rows: Vec<FeatureRow>) -> Self {
        let source_indices = (0..rows.len()).collect();
        Self { rows, source_indices }
    }
}

pub fn euclidean(a: &FeatureRow, b: &FeatureRow) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Index (into `members`) of the medoid: smallest summed distance to all
/// members, ties to the earliest member. `members` must be ascending for the
/// tie rule to mean "smallest frame index".
pub fn medoid(points: &[FeatureRow], members: &[usize]) -> usize {
    let mut best = members[0];
    let mut best_sum = f64::INFINITY;
    for &i in members {
        let sum: f64 = members.iter().map(|&j| euclidean(&points[i], &points[j])).sum();
        if sum < best_sum {
            best = i;
            best_sum = sum;
        }
    }
    best
}

fn nearest(centroids: &[FeatureRow], p: &FeatureRow) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = euclidean(centroid, p);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

/// Greedy farthest-point seeding from a seeded random start frame.
fn farthest_point_init(points: &[FeatureRow], k: usize, seed: u64) -> Vec<FeatureRow> {
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.random_range(0..n);
    let mut chosen = vec![false; n];
    chosen[start] = true;
    let mut min_dist: Vec<f64> = points.iter().map(|p| euclidean(p, &points[start])).collect();
    let mut centers = vec![points[start]];
    while centers.len() < k {
        let mut pick = None;
        let mut far = -1.0;
        for i in (0..n).filter(|&i| !chosen[i]) {
            if min_dist[i] > far {
                far = min_dist[i];
                pick = Some(i);
            }
        }
        let pick = pick.expect("k <= n leaves an unchosen frame");
        chosen[pick] = true;
        centers.push(points[pick]);
        for i in 0..n {
            min_dist[i] = min_dist[i].min(euclidean(&points[i], &points[pick]));
        }
    }
    centers
}

/// Moves points into empty clusters: each empty cluster takes the point of the
/// largest cluster lying farthest from that cluster's centroid.
fn repair_empty(points: &[FeatureRow], centroids: &[FeatureRow], assign: &mut [usize], k: usize) {
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assign.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let largest = (0..k).fold(0, |best, c| if sizes[c] > sizes[best] { c } else { best });
        let mut far = None;
        let mut far_d = -1.0;
        for (i, p) in points.iter().enumerate() {
            if assign[i] == largest {
                let d = euclidean(p, &centroids[largest]);
                if d > far_d {
                    far_d = d;
                    far = Some(i);
                }
            }
        }
        assign[far.expect("largest cluster is non-empty")] = empty;
    }
}

/// K-means clusters of `points` (requires `1 <= k <= points.len()`). Every
/// returned cluster is non-empty with members in ascending order.
pub fn kmeans_clusters(points: &[FeatureRow], k: usize, seed: u64) -> Vec<Vec<usize>> {
    assert!(k >= 1 && k <= points.len(), "k must be in 1..=n");
    let mut centroids = farthest_point_init(points, k, seed);
    let mut assign: Vec<usize> = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        let mut next: Vec<usize> = points.iter().map(|p| nearest(&centroids, p)).collect();
        repair_empty(points, &centroids, &mut next, k);
        let converged = next == assign;
        assign = next;
        if converged {
            break;
        }
        let mut sums = vec![[0.0; FEATURE_DIM]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assign) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            for d in 0..FEATURE_DIM {
                centroids[c][d] = sums[c][d] / counts[c] as f64;
            }
        }
    }
    let mut clusters = vec![Vec::new(); k];
    for (i, &c) in assign.iter().enumerate() {
        clusters[c].push(i);
    }
    clusters
}

/// Selects exactly `k` key frames from `features`.
pub fn select_keyframes(features: &[FrameFeatures], k: usize, seed: u64) -> Result<KeyframeMatrix, KeyframeError> {
    let points: Vec<FeatureRow> = features.iter().map(FrameFeatures::to_array).collect();
    select_keyframe_rows(&points, k, seed)
}

pub fn select_keyframe_rows(points: &[FeatureRow], k: usize, seed: u64) -> Result<KeyframeMatrix, KeyframeError> {
    if points.is_empty() {
        return Err(KeyframeError::Empty);
    }
    if k == 0 {
        return Err(KeyframeError::ZeroK);
    }
    let n = points.len();
    let mut picks: Vec<(usize, usize)> = if n >= k {
        kmeans_clusters(points, k, seed)
            .iter()
            .map(|members| (medoid(points, members), 0))
            .collect()
    } else {
        (0..k).map(|c| (c % n, c / n)).collect()
    };
    picks.sort_unstable();
    Ok(KeyframeMatrix {
        rows: picks.iter().map(|&(i, _)| points[i]).collect(),
        source_indices: picks.iter().map(|&(i, _)| i).collect(),
    })
}
