//! Sign recognition from skin-blob geometry with interval-valued templates.

pub mod dataset;
pub mod evaluation;
pub mod geometry;
pub mod ingest;
pub mod kb;
pub mod keyframe;
pub mod pipeline;
pub mod recognizer;
pub mod segmentation;
pub mod spatial;
pub mod synth;
