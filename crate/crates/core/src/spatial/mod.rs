//! Face / manual-hand / non-manual-hand tracking and per-frame spatial
//! features.
//!
//! Tracking runs in two passes over one instance. The first pass follows the
//! face and two provisional hand tracks, matching blobs to tracks by nearest
//! centroid and resolving frames where two components merged into one. The
//! second pass names the hand with the longer centroid path the manual hand
//! and relabels every frame accordingly.

mod features;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use features::{angle_at, compute_features, global_centroid, EmptyBlobs, FrameFeatures, FEATURE_DIM};

use crate::geometry::Point;
use crate::segmentation::ComponentBlob;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Overlap {
    None,
    ManualFace,
    ManualNonManual,
    Unresolved,
}

impl Overlap {
    pub fn as_str(self) -> &'static str {
        match self {
            Overlap::None => "none",
            Overlap::ManualFace => "manual-face",
            Overlap::ManualNonManual => "manual-nonmanual",
            Overlap::Unresolved => "unresolved",
        }
    }
}

/// Role-assigned centroids of one frame: face (`c1`), manual hand (`c2`),
/// non-manual hand (`c3`) and the global centroid of all skin blobs (`gc`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackedFrame {
    pub frame_index: usize,
    pub c1: Point,
    pub c2: Point,
    pub c3: Point,
    pub gc: Point,
    pub overlap: Overlap,
}

impl TrackedFrame {
    pub fn is_resolved(&self) -> bool {
        self.overlap != Overlap::Unresolved
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingConfig {
    /// A two-blob frame counts as an overlap only if the merged blob holds at
    /// least this fraction of the two merged components' previous areas and
    /// is larger than either of them.
    pub merge_ratio: f64,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        Self { merge_ratio: 0.7 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TrackingError {
    #[error("instance has no frames")]
    NoFrames,
    #[error("first frame has {0} components; face and both hands must be visible and disjoint")]
    FirstFrame(usize),
}

/// Manual-hand centroid in a frame where it merged with the face: the mean of
/// its last unmerged centroid and the merged blob's centroid.
pub fn resolve_overlap_face(prev_manual: Point, merged: Point) -> Point {
    Point::new((prev_manual.x + merged.x) / 2.0, (prev_manual.y + merged.y) / 2.0)
}

/// Hand centroids in a frame where both hands merged: each is the mean of its
/// last unmerged centroid and the merged blob's centroid.
pub fn resolve_overlap_hands(prev_manual: Point, prev_nonmanual: Point, merged: Point) -> (Point, Point) {
    (
        Point::new((prev_manual.x + merged.x) / 2.0, (prev_manual.y + merged.y) / 2.0),
        Point::new((prev_nonmanual.x + merged.x) / 2.0, (prev_nonmanual.y + merged.y) / 2.0),
    )
}

const FACE: usize = 0;

#[derive(Debug, Clone, Copy)]
struct Track {
    /// Latest position, observed or resolved; used for matching.
    estimate: Point,
    /// Last directly observed (unmerged) centroid.
    observed: Point,
    before_observed: Option<Point>,
    pixel_count: usize,
}

impl Track {
    fn new(b: &ComponentBlob) -> Self {
        Self { estimate: b.centroid, observed: b.centroid, before_observed: None, pixel_count: b.pixel_count }
    }

    fn observe(&mut self, b: &ComponentBlob) {
        self.before_observed = Some(self.observed);
        self.observed = b.centroid;
        self.estimate = b.centroid;
        self.pixel_count = b.pixel_count;
    }
}

#[derive(Debug, Clone, Copy)]
enum Step {
    Clear,
    FaceMerge { hand: usize, approached: bool },
    HandMerge,
    Unresolved,
}

#[derive(Debug, Clone, Copy)]
struct Provisional {
    pos: [Point; 3],
    step: Step,
    gc: Point,
}

const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
const PAIRS: [(usize, usize, usize); 3] = [(0, 1, 2), (0, 2, 1), (1, 2, 0)];

/// Assigns face / manual / non-manual roles to the blobs of every frame of
/// one instance.
///
/// The face is the topmost blob of the first frame and its centroid is reused
/// for every frame. Frames with other than two or three blobs, and two-blob
/// frames failing the merge-area test, are marked [`Overlap::Unresolved`].
pub fn assign_identities(
    blobs_per_frame: &[Vec<ComponentBlob>],
    cfg: &TrackingConfig,
) -> Result<Vec<TrackedFrame>, TrackingError> {
    let first = blobs_per_frame.first().ok_or(TrackingError::NoFrames)?;
    if first.len() != 3 {
        return Err(TrackingError::FirstFrame(first.len()));
    }
    let face_idx = (0..3)
        .min_by(|&a, &b| first[a].centroid.y.total_cmp(&first[b].centroid.y))
        .expect("three blobs");
    let mut hands: Vec<usize> = (0..3).filter(|&i| i != face_idx).collect();
    hands.sort_by(|&a, &b| {
        first[a]
            .centroid
            .x
            .total_cmp(&first[b].centroid.x)
            .then(first[a].centroid.y.total_cmp(&first[b].centroid.y))
    });
    let mut tracks = [Track::new(&first[face_idx]), Track::new(&first[hands[0]]), Track::new(&first[hands[1]])];

    let mut provisional: Vec<Provisional> = Vec::with_capacity(blobs_per_frame.len());
    let mut last_gc = global_centroid(first).expect("three blobs");
    for (i, blobs) in blobs_per_frame.iter().enumerate() {
        let gc = global_centroid(blobs).unwrap_or(last_gc);
        last_gc = gc;
        let step = if i == 0 {
            Step::Clear
        } else {
            match blobs.len() {
                3 => {
                    match_three(&mut tracks, blobs);
                    Step::Clear
                }
                2 => resolve_two(&mut tracks, blobs, cfg),
                n => {
                    warn!("frame {i}: {n} skin components, frame left unresolved");
                    Step::Unresolved
                }
            }
        };
        provisional.push(Provisional {
            pos: [tracks[0].estimate, tracks[1].estimate, tracks[2].estimate],
            step,
            gc,
        });
    }

    // The more dynamic hand is the manual hand; ties go to the leftmost hand
    // of the first frame (track 1).
    let mut path = [0.0f64; 3];
    let mut prev: Option<&Provisional> = None;
    for p in provisional.iter().filter(|p| !matches!(p.step, Step::Unresolved)) {
        if let Some(q) = prev {
            for (h, len) in path.iter_mut().enumerate().skip(1) {
                *len += p.pos[h].distance(q.pos[h]);
            }
        }
        prev = Some(p);
    }
    let (manual, nonmanual) = if path[2] > path[1] { (2, 1) } else { (1, 2) };
    let face = provisional[0].pos[FACE];

    Ok(provisional
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let overlap = match p.step {
                Step::Clear => Overlap::None,
                Step::HandMerge => Overlap::ManualNonManual,
                Step::FaceMerge { hand, .. } if hand == manual => Overlap::ManualFace,
                Step::FaceMerge { approached: true, .. } => Overlap::ManualFace,
                Step::FaceMerge { .. } => {
                    warn!("frame {i}: non-manual hand merged with the face without approaching it");
                    Overlap::Unresolved
                }
                Step::Unresolved => Overlap::Unresolved,
            };
            TrackedFrame {
                frame_index: i,
                c1: face,
                c2: p.pos[manual],
                c3: p.pos[nonmanual],
                gc: p.gc,
                overlap,
            }
        })
        .collect())
}

fn match_three(tracks: &mut [Track; 3], blobs: &[ComponentBlob]) {
    let cost = |perm: &[usize; 3]| -> f64 {
        (0..3).map(|r| blobs[perm[r]].centroid.distance(tracks[r].estimate)).sum()
    };
    let mut best = PERMUTATIONS[0];
    let mut best_cost = cost(&best);
    for perm in &PERMUTATIONS[1..] {
        let c = cost(perm);
        if c < best_cost {
            best = *perm;
            best_cost = c;
        }
    }
    for r in 0..3 {
        tracks[r].observe(&blobs[best[r]]);
    }
}

fn resolve_two(tracks: &mut [Track; 3], blobs: &[ComponentBlob], cfg: &TrackingConfig) -> Step {
    // Hypothesis: blob `m` is roles (a, b) merged, the other blob is role `rest`.
    // A merged blob must reach the area floor and outgrow both parts.
    let mut best: Option<(f64, usize, (usize, usize, usize))> = None;
    for m in 0..2 {
        for &(a, b, rest) in &PAIRS {
            let (area_a, area_b) = (tracks[a].pixel_count, tracks[b].pixel_count);
            let area = blobs[m].pixel_count;
            if (area as f64) < cfg.merge_ratio * (area_a + area_b) as f64 || area <= area_a.max(area_b) {
                continue;
            }
            let mid = tracks[a].estimate.midpoint(tracks[b].estimate);
            let cost = blobs[m].centroid.distance(mid) + blobs[1 - m].centroid.distance(tracks[rest].estimate);
            if best.is_none_or(|(c, _, _)| cost < c) {
                best = Some((cost, m, (a, b, rest)));
            }
        }
    }
    let Some((_, m, (a, b, rest))) = best else {
        return Step::Unresolved;
    };
    let merged = &blobs[m];
    tracks[rest].observe(&blobs[1 - m]);
    if a == FACE {
        let face = tracks[FACE].observed;
        let t = &mut tracks[b];
        let resolved = resolve_overlap_face(t.observed, merged.centroid);
        let approached = t
            .before_observed
            .is_some_and(|before| t.observed.distance(face) < before.distance(face));
        t.estimate = resolved;
        Step::FaceMerge { hand: b, approached }
    } else {
        let (pa, pb) = resolve_overlap_hands(tracks[a].observed, tracks[b].observed, merged.centroid);
        tracks[a].estimate = pa;
        tracks[b].estimate = pb;
        Step::HandMerge
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_blob(cx: usize, cy: usize, half: usize) -> ComponentBlob {
        let mut px = Vec::new();
        for y in cy - half..=cy + half {
            for x in cx - half..=cx + half {
                px.push((x, y));
            }
        }
        ComponentBlob::from_pixels(&px)
    }

    #[test]
    fn face_overlap_formula() {
        assert_eq!(resolve_overlap_face(Point::new(10.0, 40.0), Point::new(20.0, 60.0)), Point::new(15.0, 50.0));
        assert_eq!(resolve_overlap_face(Point::new(33.0, 33.0), Point::new(33.0, 33.0)), Point::new(33.0, 33.0));
        assert_eq!(resolve_overlap_face(Point::new(0.0, 0.0), Point::new(7.0, 9.0)), Point::new(3.5, 4.5));
    }

    #[test]
    fn hand_overlap_formula() {
        let p = Point::new;
        assert_eq!(
            resolve_overlap_hands(p(10.0, 10.0), p(30.0, 10.0), p(20.0, 10.0)),
            (p(15.0, 10.0), p(25.0, 10.0))
        );
        assert_eq!(resolve_overlap_hands(p(5.0, 5.0), p(5.0, 5.0), p(5.0, 5.0)), (p(5.0, 5.0), p(5.0, 5.0)));
        assert_eq!(
            resolve_overlap_hands(p(0.0, 0.0), p(100.0, 0.0), p(40.0, 20.0)),
            (p(20.0, 10.0), p(70.0, 10.0))
        );
    }

    #[test]
    fn static_blobs_tie_goes_to_leftmost() {
        let frame = vec![square_blob(50, 10, 4), square_blob(80, 60, 3), square_blob(20, 60, 3)];
        let frames = vec![frame; 5];
        let tracked = assign_identities(&frames, &TrackingConfig::default()).unwrap();
        assert_eq!(tracked.len(), 5);
        for t in &tracked {
            assert_eq!(t.overlap, Overlap::None);
            assert_eq!(t.c1, Point::new(50.0, 10.0));
            assert_eq!(t.c2, Point::new(20.0, 60.0));
            assert_eq!(t.c3, Point::new(80.0, 60.0));
            assert_eq!(t, &TrackedFrame { frame_index: t.frame_index, ..tracked[0] });
        }
    }

    #[test]
    fn more_dynamic_hand_is_manual() {
        // the right hand travels 100 px, the left one 5 px
        let mut frames = Vec::new();
        for i in 0..5 {
            frames.push(vec![
                square_blob(60, 10, 5),
                square_blob(20 + (i * 5) / 4, 70, 3),
                square_blob(80 + i * 20, 40 + i * 5, 3),
            ]);
        }
        let tracked = assign_identities(&frames, &TrackingConfig::default()).unwrap();
        assert_eq!(tracked[4].c2, frames[4][2].centroid);
        assert_eq!(tracked[4].c3, frames[4][1].centroid);
    }

    #[test]
    fn blob_order_does_not_confuse_tracking() {
        let a = vec![square_blob(60, 10, 5), square_blob(20, 70, 3), square_blob(100, 70, 3)];
        let b = vec![square_blob(102, 68, 3), square_blob(61, 10, 5), square_blob(19, 71, 3)];
        let c = vec![square_blob(18, 72, 3), square_blob(104, 66, 3), square_blob(60, 11, 5)];
        let t = assign_identities(&[a, b, c.clone()], &TrackingConfig::default()).unwrap();
        assert_eq!(t[2].c2, c[1].centroid);
        assert_eq!(t[2].c3, c[0].centroid);
    }

    #[test]
    fn hand_crossing_face_is_resolved_with_mean() {
        let face = square_blob(60, 20, 8);
        let left = square_blob(20, 80, 4);
        let mut frames = vec![
            vec![face.clone(), left.clone(), square_blob(100, 80, 4)],
            vec![face.clone(), left.clone(), square_blob(90, 60, 4)],
            vec![face.clone(), left.clone(), square_blob(75, 40, 4)],
        ];
        // hand overlaps the lower face edge: union of face and hand squares
        let mut px: Vec<_> = face.pixels().collect();
        px.extend(square_blob(62, 28, 4).pixels());
        let merged = ComponentBlob::from_pixels(&px);
        frames.push(vec![merged.clone(), left.clone()]);
        frames.push(vec![face.clone(), left.clone(), square_blob(80, 45, 4)]);
        let t = assign_identities(&frames, &TrackingConfig::default()).unwrap();
        assert_eq!(t[3].overlap, Overlap::ManualFace);
        assert_eq!(t[3].c2, resolve_overlap_face(Point::new(75.0, 40.0), merged.centroid));
        assert_eq!(t[3].c3, left.centroid);
        assert_eq!(t[3].c1, face.centroid);
        assert_eq!(t[4].overlap, Overlap::None);
        assert_eq!(t[4].c2, Point::new(80.0, 45.0));
    }

    #[test]
    fn merged_hands_are_resolved_with_means() {
        let face = square_blob(60, 15, 8);
        let mut frames = vec![
            vec![face.clone(), square_blob(30, 70, 4), square_blob(100, 70, 4)],
            vec![face.clone(), square_blob(32, 70, 4), square_blob(70, 70, 4)],
        ];
        let mut px: Vec<_> = square_blob(40, 70, 4).pixels().collect();
        px.extend(square_blob(46, 70, 4).pixels());
        let merged = ComponentBlob::from_pixels(&px);
        frames.push(vec![face.clone(), merged.clone()]);
        let t = assign_identities(&frames, &TrackingConfig::default()).unwrap();
        assert_eq!(t[2].overlap, Overlap::ManualNonManual);
        let (m, n) = resolve_overlap_hands(Point::new(70.0, 70.0), Point::new(32.0, 70.0), merged.centroid);
        assert_eq!((t[2].c2, t[2].c3), (m, n));
    }

    #[test]
    fn small_merged_blob_is_unresolved() {
        // equal-sized blobs: no single blob reaches the merged-area floor
        let face = square_blob(60, 15, 4);
        let frames = vec![
            vec![face.clone(), square_blob(30, 70, 4), square_blob(100, 70, 4)],
            vec![face.clone(), square_blob(30, 70, 4)],
        ];
        let t = assign_identities(&frames, &TrackingConfig::default()).unwrap();
        assert_eq!(t[1].overlap, Overlap::Unresolved);
    }

    #[test]
    fn wrong_blob_counts() {
        let face = square_blob(60, 15, 8);
        assert_eq!(assign_identities(&[], &TrackingConfig::default()), Err(TrackingError::NoFrames));
        assert_eq!(
            assign_identities(&[vec![face.clone(), square_blob(30, 70, 4)]], &TrackingConfig::default()),
            Err(TrackingError::FirstFrame(2))
        );
        let ok = vec![face.clone(), square_blob(30, 70, 4), square_blob(100, 70, 4)];
        let mut four = ok.clone();
        four.push(square_blob(10, 10, 2));
        let t = assign_identities(&[ok.clone(), four, vec![], ok], &TrackingConfig::default()).unwrap();
        assert_eq!(t[1].overlap, Overlap::Unresolved);
        assert_eq!(t[2].overlap, Overlap::Unresolved);
        assert_eq!(t[3].overlap, Overlap::None);
        assert!(t.iter().all(|f| f.c2.is_finite() && f.gc.is_finite()));
    }
}
