//! Binary erosion/dilation with a square structuring element.
//!
//! Windows are clipped to the image: pixels outside the frame neither erode
//! nor dilate. Erosion and dilation stay adjoint under this convention, so
//! opening and closing keep their usual algebraic properties.

use serde::{Deserialize, Serialize};

use super::{BinaryMask, SegmentationError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphConfig {
    /// Side of the square structuring element; odd, >= 1.
    pub kernel: usize,
    /// Rounds of opening followed by closing.
    pub iterations: usize,
}

impl Default for MorphConfig {
    fn default() -> Self {
        Self { kernel: 3, iterations: 2 }
    }
}

impl MorphConfig {
    pub fn validate(&self) -> Result<(), SegmentationError> {
        if self.kernel < 1 || self.kernel.is_multiple_of(2) {
            return Err(SegmentationError::InvalidMorphConfig(format!(
                "kernel must be odd and >= 1, got {}",
                self.kernel
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Op {
    Erode,
    Dilate,
}

/// One 1-D pass along rows (`horizontal`) or columns, using a running count
/// of set pixels so each output costs O(1).
fn pass(src: &[bool], w: usize, h: usize, radius: usize, horizontal: bool, op: Op) -> Vec<bool> {
    let mut out = vec![false; src.len()];
    let (lines, len) = if horizontal { (h, w) } else { (w, h) };
    let idx = |line: usize, i: usize| if horizontal { line * w + i } else { i * w + line };
    let mut prefix = vec![0usize; len + 1];
    for line in 0..lines {
        for i in 0..len {
            prefix[i + 1] = prefix[i] + src[idx(line, i)] as usize;
        }
        for i in 0..len {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(len - 1);
            let ones = prefix[hi + 1] - prefix[lo];
            out[idx(line, i)] = match op {
                Op::Erode => ones == hi - lo + 1,
                Op::Dilate => ones > 0,
            };
        }
    }
    out
}

fn apply(mask: &BinaryMask, kernel: usize, op: Op) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let r = kernel / 2;
    if r == 0 || w == 0 || h == 0 {
        return mask.clone();
    }
    let rows = pass(mask.bits(), w, h, r, true, op);
    BinaryMask::from_bits(w, h, pass(&rows, w, h, r, false, op))
}

pub fn erode(mask: &BinaryMask, kernel: usize) -> BinaryMask {
    apply(mask, kernel, Op::Erode)
}

pub fn dilate(mask: &BinaryMask, kernel: usize) -> BinaryMask {
    apply(mask, kernel, Op::Dilate)
}

pub fn open(mask: &BinaryMask, kernel: usize) -> BinaryMask {
    dilate(&erode(mask, kernel), kernel)
}

pub fn close(mask: &BinaryMask, kernel: usize) -> BinaryMask {
    erode(&dilate(mask, kernel), kernel)
}

/// Applies `iterations` rounds of opening then closing, stopping early once a
/// round leaves the mask unchanged.
pub fn morph_cleanup(mask: &BinaryMask, cfg: &MorphConfig) -> Result<BinaryMask, SegmentationError> {
    cfg.validate()?;
    let mut cur = mask.clone();
    for _ in 0..cfg.iterations {
        let next = close(&open(&cur, cfg.kernel), cfg.kernel);
        if next == cur {
            break;
        }
        cur = next;
    }
    Ok(cur)
}
