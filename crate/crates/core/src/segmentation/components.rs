use serde::{Deserialize, Serialize};

use super::BinaryMask;
use crate::geometry::{BBox, Point};

/// A horizontal run of member pixels on row `y`, columns `x0..=x1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub y: usize,
    pub x0: usize,
    pub x1: usize,
}

/// An 8-connected skin region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentBlob {
    pub pixel_count: usize,
    pub centroid: Point,
    pub bbox: BBox,
    /// Member pixels, run-length encoded in raster order.
    pub runs: Vec<Run>,
}

impl ComponentBlob {
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.runs.iter().flat_map(|r| (r.x0..=r.x1).map(move |x| (x, r.y)))
    }

    /// Builds a blob from member pixels; used for synthetic blobs in tests.
    pub fn from_pixels(pixels: &[(usize, usize)]) -> Self {
        assert!(!pixels.is_empty());
        let mut sorted = pixels.to_vec();
        sorted.sort_by_key(|&(x, y)| (y, x));
        sorted.dedup();
        let (mut sx, mut sy) = (0.0, 0.0);
        let mut bbox = BBox { xmin: usize::MAX, ymin: usize::MAX, xmax: 0, ymax: 0 };
        let mut runs: Vec<Run> = Vec::new();
        for &(x, y) in &sorted {
            sx += x as f64;
            sy += y as f64;
            bbox.xmin = bbox.xmin.min(x);
            bbox.ymin = bbox.ymin.min(y);
            bbox.xmax = bbox.xmax.max(x);
            bbox.ymax = bbox.ymax.max(y);
            match runs.last_mut() {
                Some(r) if r.y == y && r.x1 + 1 == x => r.x1 = x,
                _ => runs.push(Run { y, x0: x, x1: x }),
            }
        }
        let n = sorted.len();
        ComponentBlob {
            pixel_count: n,
            centroid: Point::new(sx / n as f64, sy / n as f64),
            bbox,
            runs,
        }
    }
}

/// Labels 8-connected components, keeps those with at least `min_area`
/// pixels and returns them by descending size (ties: raster order of the
/// first pixel).
pub fn extract_components(mask: &BinaryMask, min_area: usize) -> Vec<ComponentBlob> {
    let (w, h) = (mask.width(), mask.height());
    let mut visited = vec![false; w * h];
    let mut blobs = Vec::new();
    let mut stack = Vec::new();
    let mut members = Vec::new();

    for start in 0..w * h {
        if visited[start] || !mask.bits()[start] {
            continue;
        }
        visited[start] = true;
        stack.push(start);
        members.clear();
        while let Some(i) = stack.pop() {
            members.push((i % w, i / w));
            let (x, y) = (i % w, i / w);
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let j = ny * w + nx;
                    if !visited[j] && mask.bits()[j] {
                        visited[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if members.len() >= min_area.max(1) {
            blobs.push(ComponentBlob::from_pixels(&members));
        }
    }
    // stable: equal sizes keep discovery (raster) order
    blobs.sort_by_key(|b| std::cmp::Reverse(b.pixel_count));
    blobs
}
