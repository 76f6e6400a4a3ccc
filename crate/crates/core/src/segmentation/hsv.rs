use serde::{Deserialize, Serialize};

use super::{BinaryMask, SegmentationError};
use crate::ingest::RgbFrame;

/// Hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Hsv {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

impl Hsv {
    pub fn from_rgb([r, g, b]: [u8; 3]) -> Self {
        let (r, g, b) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
        let max = r.max(g).max(b);
        let min = r.min(g).min(b);
        let delta = max - min;
        let mut h = if delta == 0.0 {
            0.0
        } else if max == r {
            60.0 * ((g - b) / delta)
        } else if max == g {
            60.0 * ((b - r) / delta + 2.0)
        } else {
            60.0 * ((r - g) / delta + 4.0)
        };
        if h < 0.0 {
            h += 360.0;
        }
        if h >= 360.0 {
            h -= 360.0;
        }
        let s = if max == 0.0 { 0.0 } else { delta / max };
        Hsv { h, s, v: max }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HsvFrame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Hsv>,
}

pub fn rgb_to_hsv(frame: &RgbFrame) -> HsvFrame {
    let pixels = frame
        .pixels()
        .chunks_exact(3)
        .map(|p| Hsv::from_rgb([p[0], p[1], p[2]]))
        .collect();
    HsvFrame { width: frame.width(), height: frame.height(), pixels }
}

/// Skin band on hue and saturation. The hue band is circular: `hue_lo >
/// hue_hi` wraps through 0°. With `adaptive` set, the saturation floor is
/// replaced per frame by Otsu's threshold on the saturation histogram; a
/// frame with a degenerate histogram keeps `sat_lo`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkinConfig {
    pub hue_lo: f64,
    pub hue_hi: f64,
    pub sat_lo: f64,
    pub sat_hi: f64,
    pub adaptive: bool,
}

impl Default for SkinConfig {
    fn default() -> Self {
        Self { hue_lo: 0.0, hue_hi: 50.0, sat_lo: 0.2, sat_hi: 0.9, adaptive: true }
    }
}

impl SkinConfig {
    pub fn validate(&self) -> Result<(), SegmentationError> {
        let bad = |m: String| Err(SegmentationError::InvalidSkinConfig(m));
        for (name, h) in [("hue_lo", self.hue_lo), ("hue_hi", self.hue_hi)] {
            if !(0.0..360.0).contains(&h) {
                return bad(format!("{name} = {h} outside [0, 360)"));
            }
        }
        for (name, s) in [("sat_lo", self.sat_lo), ("sat_hi", self.sat_hi)] {
            if !(0.0..=1.0).contains(&s) {
                return bad(format!("{name} = {s} outside [0, 1]"));
            }
        }
        if self.sat_lo > self.sat_hi {
            return bad(format!("sat_lo {} > sat_hi {}", self.sat_lo, self.sat_hi));
        }
        Ok(())
    }

    pub fn hue_in_band(&self, h: f64) -> bool {
        if self.hue_lo <= self.hue_hi {
            h >= self.hue_lo && h <= self.hue_hi
        } else {
            h >= self.hue_lo || h <= self.hue_hi
        }
    }
}

const SAT_BINS: usize = 256;

fn sat_bin(s: f64) -> usize {
    ((s * SAT_BINS as f64) as usize).min(SAT_BINS - 1)
}

/// Otsu's threshold on the saturation histogram, returned as the lowest
/// saturation of the upper class. `None` when no split has positive
/// between-class variance.
pub fn otsu_threshold(frame: &HsvFrame) -> Option<f64> {
    let mut hist = [0u64; SAT_BINS];
    for p in &frame.pixels {
        hist[sat_bin(p.s)] += 1;
    }
    let total = frame.pixels.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();

    let mut best: Option<(usize, f64)> = None;
    let (mut w0, mut sum0) = (0.0, 0.0);
    for (k, &c) in hist.iter().enumerate().take(SAT_BINS - 1) {
        w0 += c as f64;
        sum0 += k as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if between > 0.0 && best.is_none_or(|(_, b)| between > b) {
            best = Some((k, between));
        }
    }
    best.map(|(k, _)| (k + 1) as f64 / SAT_BINS as f64)
}

pub fn skin_mask(frame: &HsvFrame, cfg: &SkinConfig) -> Result<BinaryMask, SegmentationError> {
    cfg.validate()?;
    let sat_lo = if cfg.adaptive {
        otsu_threshold(frame).unwrap_or(cfg.sat_lo)
    } else {
        cfg.sat_lo
    };
    let bits = frame
        .pixels
        .iter()
        .map(|p| cfg.hue_in_band(p.h) && p.s >= sat_lo && p.s <= cfg.sat_hi)
        .collect();
    Ok(BinaryMask::from_bits(frame.width, frame.height, bits))
}
