use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::TrackedFrame;
use crate::geometry::Point;
use crate::segmentation::ComponentBlob;

/// Number of per-frame features.
pub const FEATURE_DIM: usize = 7;

#[derive(Debug, Error, PartialEq)]
#[error("global centroid of an empty blob list")]
pub struct EmptyBlobs;

/// Distances d1..d6 (pixels) and the angle θ at the manual hand (radians).
///
/// d1, d2, d3: global centroid to face, manual hand, non-manual hand.
/// d4, d5, d6: face–manual, face–non-manual, manual–non-manual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameFeatures {
    pub d: [f64; 6],
    pub theta: f64,
}

impl FrameFeatures {
    pub fn to_array(&self) -> [f64; FEATURE_DIM] {
        let d = self.d;
        [d[0], d[1], d[2], d[3], d[4], d[5], self.theta]
    }

    pub fn from_array(v: [f64; FEATURE_DIM]) -> Self {
        Self { d: [v[0], v[1], v[2], v[3], v[4], v[5]], theta: v[6] }
    }

    /// Divides the distances by `scale` (e.g. the frame diagonal); θ is unitless.
    pub fn scaled(&self, scale: f64) -> Self {
        let mut d = self.d;
        d.iter_mut().for_each(|v| *v /= scale);
        Self { d, theta: self.theta }
    }
}

/// Pixel-count-weighted mean of blob centroids, i.e. the centroid of the
/// union of disjoint blobs.
pub fn global_centroid(blobs: &[ComponentBlob]) -> Result<Point, EmptyBlobs> {
    let total: usize = blobs.iter().map(|b| b.pixel_count).sum();
    if blobs.is_empty() || total == 0 {
        return Err(EmptyBlobs);
    }
    let (mut sx, mut sy) = (0.0, 0.0);
    for b in blobs {
        sx += b.centroid.x * b.pixel_count as f64;
        sy += b.centroid.y * b.pixel_count as f64;
    }
    Ok(Point::new(sx / total as f64, sy / total as f64))
}

/// Interior angle at `vertex` between the rays to `a` and `b`, in `[0, π]`.
/// Zero when either ray has zero length.
pub fn angle_at(vertex: Point, a: Point, b: Point) -> f64 {
    let (ux, uy) = (a.x - vertex.x, a.y - vertex.y);
    let (vx, vy) = (b.x - vertex.x, b.y - vertex.y);
    if (ux == 0.0 && uy == 0.0) || (vx == 0.0 && vy == 0.0) {
        return 0.0;
    }
    // atan2 of (|u x v|, u . v) equals acos of the normalized dot product
    // but stays accurate near 0 and π.
    let cross = ux * vy - uy * vx;
    let dot = ux * vx + uy * vy;
    cross.abs().atan2(dot).clamp(0.0, std::f64::consts::PI)
}

pub fn compute_features(tf: &TrackedFrame) -> FrameFeatures {
    let (c1, c2, c3, gc) = (tf.c1, tf.c2, tf.c3, tf.gc);
    FrameFeatures {
        d: [
            gc.distance(c1),
            gc.distance(c2),
            gc.distance(c3),
            c1.distance(c2),
            c1.distance(c3),
            c2.distance(c3),
        ],
        theta: angle_at(c2, c1, c3),
    }
}
