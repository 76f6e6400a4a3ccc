//! TOML configuration shared by every command.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use signsym_core::evaluation::{EvalParams, SplitRatio};
use signsym_core::kb::{validate_delta, KbParams, Linkage, ThresholdMode};
use signsym_core::pipeline::PipelineParams;
use signsym_core::synth::SynthConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub keyframe: u64,
    pub evaluation: u64,
    pub synth: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { keyframe: 0, evaluation: 1, synth: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KbSection {
    pub delta: f64,
    pub depth: usize,
    pub linkage: Linkage,
    pub threshold_mode: ThresholdMode,
}

impl Default for KbSection {
    fn default() -> Self {
        let p = KbParams::default();
        Self { delta: p.delta, depth: p.depth, linkage: p.linkage, threshold_mode: p.threshold_mode }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecognitionSection {
    pub reject_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    /// Holdout split as "TRAIN:TEST".
    pub ratio: String,
    pub trials: usize,
    /// Test instances held out per class in each k-fold fold.
    pub fold_size: usize,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self { ratio: "60:40".into(), trials: 50, fold_size: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub classes: usize,
    pub signers: usize,
    pub instances: usize,
    pub render: SynthConfig,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self { classes: 26, signers: 4, instances: 10, render: SynthConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub manifest: Option<PathBuf>,
    pub kb: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seeds: Seeds,
    pub pipeline: PipelineParams,
    pub kb: KbSection,
    pub recognition: RecognitionSection,
    pub evaluation: EvaluationSection,
    pub synth: SynthSection,
    pub paths: Paths,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                Self::parse(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => Self::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        validate_delta(self.kb.delta)?;
        if self.pipeline.k == 0 {
            bail!("pipeline.k must be at least 1");
        }
        if self.kb.depth == 0 {
            bail!("kb.depth must be at least 1");
        }
        self.ratio()?;
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineParams {
        PipelineParams { keyframe_seed: self.seeds.keyframe, ..self.pipeline }
    }

    pub fn kb_params(&self) -> KbParams {
        KbParams {
            k: self.pipeline.k,
            delta: self.kb.delta,
            depth: self.kb.depth,
            linkage: self.kb.linkage,
            threshold_mode: self.kb.threshold_mode,
        }
    }

    pub fn eval_params(&self) -> EvalParams {
        EvalParams { kb: self.kb_params(), reject_threshold: self.recognition.reject_threshold }
    }

    pub fn ratio(&self) -> Result<SplitRatio> {
        self.evaluation.ratio.parse().map_err(|e: String| anyhow::anyhow!("evaluation.ratio: {e}"))
    }
}
