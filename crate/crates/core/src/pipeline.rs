//! Frames to key-frame matrix: segmentation, tracking, features, key frames.

use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::SignInstance;
use crate::ingest::{load_frames, DatasetManifest, IngestError, InstanceEntry, RgbFrame};
use crate::keyframe::{select_keyframes, KeyframeError, KeyframeMatrix, DEFAULT_K};
use crate::segmentation::{
    default_min_area, extract_components, morph_cleanup, rgb_to_hsv, skin_mask, BinaryMask, ComponentBlob,
    MorphConfig, SegmentationError, SkinConfig,
};
use crate::spatial::{assign_identities, compute_features, FrameFeatures, TrackedFrame, TrackingConfig, TrackingError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
    #[error(transparent)]
    Tracking(#[from] TrackingError),
    #[error(transparent)]
    Keyframe(#[from] KeyframeError),
    #[error("every frame was unresolved")]
    NoResolvedFrames,
    #[error("{id}: {source}")]
    Instance { id: String, source: Box<PipelineError> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineParams {
    pub skin: SkinConfig,
    pub morph: MorphConfig,
    /// Smallest kept blob in pixels; `None` uses 0.1% of the frame area.
    pub min_area: Option<usize>,
    pub tracking: TrackingConfig,
    pub k: usize,
    pub keyframe_seed: u64,
    /// Divide distances by the frame diagonal.
    pub normalize_diagonal: bool,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            skin: SkinConfig::default(),
            morph: MorphConfig::default(),
            min_area: None,
            tracking: TrackingConfig::default(),
            k: DEFAULT_K,
            keyframe_seed: 0,
            normalize_diagonal: false,
        }
    }
}

/// Cleaned skin mask and its components, largest first.
pub fn segment_frame(frame: &RgbFrame, p: &PipelineParams) -> Result<(BinaryMask, Vec<ComponentBlob>), PipelineError> {
    let raw = skin_mask(&rgb_to_hsv(frame), &p.skin)?;
    let mask = morph_cleanup(&raw, &p.morph)?;
    let min_area = p.min_area.unwrap_or_else(|| default_min_area(frame.width(), frame.height()));
    let blobs = extract_components(&mask, min_area);
    Ok((mask, blobs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedInstance {
    pub tracked: Vec<TrackedFrame>,
    /// Features of resolved frames only, in frame order.
    pub features: Vec<FrameFeatures>,
    /// Key frames; source indices refer to the original frame numbering.
    pub keyframes: KeyframeMatrix,
}

pub fn process_frames(frames: &[RgbFrame], p: &PipelineParams) -> Result<ProcessedInstance, PipelineError> {
    let blobs = frames
        .iter()
        .map(|f| segment_frame(f, p).map(|(_, b)| b))
        .collect::<Result<Vec<_>, _>>()?;
    let tracked = assign_identities(&blobs, &p.tracking)?;
    let resolved: Vec<&TrackedFrame> = tracked.iter().filter(|t| t.is_resolved()).collect();
    if resolved.is_empty() {
        return Err(PipelineError::NoResolvedFrames);
    }
    let skipped = tracked.len() - resolved.len();
    if skipped > 0 {
        warn!("{skipped} of {} frames unresolved and skipped", tracked.len());
    }
    let scale = frames
        .first()
        .filter(|_| p.normalize_diagonal)
        .map(|f| (f.width() as f64).hypot(f.height() as f64))
        .unwrap_or(1.0);
    let features: Vec<FrameFeatures> = resolved.iter().map(|t| compute_features(t).scaled(scale)).collect();
    let mut keyframes = select_keyframes(&features, p.k, p.keyframe_seed)?;
    for s in &mut keyframes.source_indices {
        *s = resolved[*s].frame_index;
    }
    Ok(ProcessedInstance { tracked, features, keyframes })
}

pub fn process_entry(entry: &InstanceEntry, root: &Path, p: &PipelineParams) -> Result<SignInstance, PipelineError> {
    let wrap = |e: PipelineError| PipelineError::Instance { id: entry.id(), source: Box::new(e) };
    let frames = load_frames(entry, root).map_err(|e| wrap(e.into()))?;
    let processed = process_frames(&frames, p).map_err(wrap)?;
    Ok(SignInstance {
        label: entry.label.clone(),
        signer: entry.signer.clone(),
        instance: entry.instance,
        keyframes: processed.keyframes,
    })
}

/// Processed instances in manifest order, plus the entries that failed.
#[derive(Debug, Default)]
pub struct DatasetBuild {
    pub instances: Vec<SignInstance>,
    pub failures: Vec<PipelineError>,
}

pub fn build_dataset(manifest: &DatasetManifest, p: &PipelineParams) -> DatasetBuild {
    let results: Vec<Result<SignInstance, PipelineError>> =
        manifest.entries.par_iter().map(|e| process_entry(e, &manifest.root, p)).collect();
    let mut out = DatasetBuild::default();
    for r in results {
        match r {
            Ok(i) => out.instances.push(i),
            Err(e) => {
                warn!("skipping {e}");
                out.failures.push(e);
            }
        }
    }
    out
}
