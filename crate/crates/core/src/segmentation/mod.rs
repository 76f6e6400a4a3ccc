//! Skin segmentation: HSV conversion, hue/saturation thresholding, iterated
//! opening/closing and 8-connected component extraction.

mod components;
mod hsv;
mod morphology;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use components::{extract_components, ComponentBlob, Run};
pub use hsv::{rgb_to_hsv, skin_mask, otsu_threshold, Hsv, HsvFrame, SkinConfig};
pub use morphology::{close, dilate, erode, morph_cleanup, open, MorphConfig};

#[derive(Debug, Error, PartialEq)]
pub enum SegmentationError {
    #[error("invalid skin config: {0}")]
    InvalidSkinConfig(String),
    #[error("invalid morphology config: {0}")]
    InvalidMorphConfig(String),
    #[error("cannot write mask {path}: {msg}")]
    Write { path: String, msg: String },
}

/// Row-major boolean image; `true` marks skin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width * height, "mask buffer size");
        Self { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Writes the mask as a 1-bit grayscale PNG (white = skin).
    pub fn save_png(&self, path: &Path) -> Result<(), SegmentationError> {
        let err = |msg: String| SegmentationError::Write { path: path.display().to_string(), msg };
        let file = std::fs::File::create(path).map_err(|e| err(e.to_string()))?;
        let mut enc = png::Encoder::new(std::io::BufWriter::new(file), self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::One);
        let mut writer = enc.write_header().map_err(|e| err(e.to_string()))?;
        let stride = self.width.div_ceil(8);
        let mut data = vec![0u8; stride * self.height];
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    data[y * stride + x / 8] |= 0x80 >> (x % 8);
                }
            }
        }
        writer.write_image_data(&data).map_err(|e| err(e.to_string()))
    }
}

/// The default minimum blob area: 0.1% of the frame, at least one pixel.
pub fn default_min_area(width: usize, height: usize) -> usize {
    ((width * height) as f64 * 0.001).ceil().max(1.0) as usize
}
