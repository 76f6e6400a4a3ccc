//! Synthetic sign videos: a static face ellipse and two hand disks moving
//! along per-class trajectories, with scheduled overlaps, signer and instance
//! jitter, and ground-truth centroids taken from the rasterized pixels.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point;
use crate::ingest::{DatasetManifest, IngestError, InstanceEntry, RgbFrame};
use crate::segmentation::ComponentBlob;
use crate::spatial::Overlap;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("no class specs given")]
    NoSpecs,
    #[error("signers and instances must be at least 1")]
    ZeroCount,
    #[error("invalid class spec {label:?}: {msg}")]
    BadSpec { label: String, msg: String },
    #[error("placed only {placed} of {wanted} classes at separation {separation}")]
    Separation { placed: usize, wanted: usize, separation: f64 },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Axis-aligned box of allowed hand-center positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Region {
    pub fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(self.x0, self.x1), p.y.clamp(self.y0, self.y1))
    }

    pub fn contains(&self, p: Point) -> bool {
        (self.x0..=self.x1).contains(&p.x) && (self.y0..=self.y1).contains(&p.y)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Point {
        Point::new(rng.random_range(self.x0..=self.x1), rng.random_range(self.y0..=self.y1))
    }
}

/// Piecewise-linear path through control points at normalized times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<Point>,
    /// Strictly increasing, from 0 to 1, one per point.
    pub knots: Vec<f64>,
}

impl Trajectory {
    pub fn evenly_timed(points: Vec<Point>) -> Self {
        let n = points.len();
        let knots = (0..n).map(|i| if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 }).collect();
        Self { points, knots }
    }

    fn validate(&self) -> Result<(), String> {
        if self.points.is_empty() || self.points.len() != self.knots.len() {
            return Err("trajectory needs one knot per control point".into());
        }
        if self.knots[0] != 0.0 || (self.points.len() > 1 && *self.knots.last().unwrap() != 1.0) {
            return Err("knots must start at 0 and end at 1".into());
        }
        if self.knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err("knots must be strictly increasing".into());
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> Point {
        let t = t.clamp(0.0, 1.0);
        let seg = self.knots.partition_point(|&k| k <= t).clamp(1, self.points.len().max(1)) - 1;
        if seg + 1 >= self.points.len() {
            return *self.points.last().expect("non-empty trajectory");
        }
        let (a, b) = (self.points[seg], self.points[seg + 1]);
        let u = (t - self.knots[seg]) / (self.knots[seg + 1] - self.knots[seg]);
        Point::new(a.x + (b.x - a.x) * u, a.y + (b.y - a.y) * u)
    }

    fn map_points(&self, f: impl FnMut(&Point) -> Point) -> Self {
        Self { points: self.points.iter().map(f).collect(), knots: self.knots.clone() }
    }

    /// Mean distance between the two paths over evenly spaced times.
    pub fn mean_distance(&self, other: &Trajectory) -> f64 {
        const SAMPLES: usize = 32;
        (0..SAMPLES)
            .map(|i| {
                let t = i as f64 / (SAMPLES - 1) as f64;
                self.at(t).distance(other.at(t))
            })
            .sum::<f64>()
            / SAMPLES as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapKind {
    /// The manual hand touches the lower edge of the face.
    Face,
    /// The manual hand touches the non-manual hand.
    Hands,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapEvent {
    pub frame: usize,
    pub kind: OverlapKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthClassSpec {
    pub label: String,
    pub manual: Trajectory,
    pub non_manual: Trajectory,
    pub overlaps: Vec<OverlapEvent>,
    /// Inclusive frame-count range.
    pub duration: (usize, usize),
}

impl SynthClassSpec {
    fn validate(&self, cfg: &SynthConfig) -> Result<(), SynthError> {
        let bad = |msg: String| SynthError::BadSpec { label: self.label.clone(), msg };
        self.manual.validate().map_err(bad)?;
        self.non_manual.validate().map_err(bad)?;
        let (lo, hi) = self.duration;
        if lo < 2 || lo > hi {
            return Err(bad(format!("duration range {lo}..={hi} needs 2 <= lo <= hi")));
        }
        if !self.manual.points.iter().all(|p| cfg.manual_region.contains(*p)) {
            return Err(bad("manual trajectory leaves its region".into()));
        }
        if !self.non_manual.points.iter().all(|p| cfg.non_manual_region.contains(*p)) {
            return Err(bad("non-manual trajectory leaves its region".into()));
        }
        if let Some(e) = self.overlaps.iter().find(|e| e.frame == 0 || e.frame >= lo) {
            return Err(bad(format!("overlap at frame {} outside 1..{lo}", e.frame)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub skin: [u8; 3],
    pub background: [u8; 3],
    pub face_center: Point,
    /// Horizontal and vertical face semi-axes.
    pub face_radii: (f64, f64),
    pub hand_radius: f64,
    pub manual_region: Region,
    pub non_manual_region: Region,
    pub control_points: usize,
    /// Non-manual hand wander around its anchor, in pixels.
    pub non_manual_wander: f64,
    pub duration: (usize, usize),
    /// Minimum mean distance between the manual paths of any two classes.
    pub min_separation: f64,
    /// Per (class, signer) control-point displacement bound, in pixels.
    pub signer_jitter: f64,
    /// Per instance control-point displacement bound, in pixels.
    pub instance_jitter: f64,
    /// Per instance change of frame count around the signer's count.
    pub instance_duration_jitter: usize,
    /// Uniform per-channel pixel noise amplitude.
    pub noise: u8,
    /// Fraction of classes given a face overlap and a hand overlap.
    pub overlap_every: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 128,
            height: 96,
            skin: [225, 170, 130],
            background: [70, 75, 90],
            face_center: Point::new(64.0, 22.0),
            face_radii: (11.0, 14.0),
            hand_radius: 7.0,
            manual_region: Region { x0: 54.0, y0: 50.0, x1: 112.0, y1: 86.0 },
            non_manual_region: Region { x0: 12.0, y0: 50.0, x1: 32.0, y1: 86.0 },
            control_points: 5,
            non_manual_wander: 3.0,
            duration: (42, 50),
            min_separation: 14.0,
            signer_jitter: 2.5,
            instance_jitter: 1.0,
            instance_duration_jitter: 2,
            noise: 0,
            overlap_every: 4,
        }
    }
}

impl SynthConfig {
    /// No jitter of any kind: every instance of a class is identical.
    pub fn noiseless() -> Self {
        Self { signer_jitter: 0.0, instance_jitter: 0.0, instance_duration_jitter: 0, noise: 0, ..Self::default() }
    }
}

fn mix(seed: u64, parts: &[u64]) -> u64 {
    // splitmix64 over the parts
    let mut z = seed;
    for &p in parts {
        z = z.wrapping_add(p).wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

const TAG_CLASS: u64 = 1;
const TAG_SIGNER: u64 = 2;
const TAG_INSTANCE: u64 = 3;

/// `n` classes whose manual paths are pairwise at least `min_separation`
/// apart on average. Every `overlap_every`-th class (offset 1) gets a face
/// overlap and every one at offset 3 a hand overlap.
pub fn random_class_specs(n: usize, cfg: &SynthConfig, seed: u64) -> Result<Vec<SynthClassSpec>, SynthError> {
    const ATTEMPTS: usize = 20_000;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, &[TAG_CLASS]));
    let mut specs: Vec<SynthClassSpec> = Vec::with_capacity(n);
    let width = n.to_string().len().max(2);
    let mut attempts = 0;
    while specs.len() < n {
        attempts += 1;
        if attempts > ATTEMPTS {
            return Err(SynthError::Separation { placed: specs.len(), wanted: n, separation: cfg.min_separation });
        }
        let manual = Trajectory::evenly_timed((0..cfg.control_points).map(|_| cfg.manual_region.sample(&mut rng)).collect());
        if specs.iter().any(|s| s.manual.mean_distance(&manual) < cfg.min_separation) {
            continue;
        }
        let anchor = cfg.non_manual_region.sample(&mut rng);
        let w = cfg.non_manual_wander;
        let non_manual = Trajectory::evenly_timed(
            (0..3)
                .map(|_| {
                    let d = Point::new(rng.random_range(-w..=w), rng.random_range(-w..=w));
                    cfg.non_manual_region.clamp(Point::new(anchor.x + d.x, anchor.y + d.y))
                })
                .collect(),
        );
        let i = specs.len();
        let lo = cfg.duration.0;
        let overlaps = match (cfg.overlap_every, i % cfg.overlap_every.max(1)) {
            (0, _) => vec![],
            (_, 1) => vec![OverlapEvent { frame: lo / 2, kind: OverlapKind::Face }],
            (_, 3) => vec![OverlapEvent { frame: 2 * lo / 3, kind: OverlapKind::Hands }],
            _ => vec![],
        };
        specs.push(SynthClassSpec {
            label: format!("C{:0width$}", i + 1),
            manual,
            non_manual,
            overlaps,
            duration: cfg.duration,
        });
    }
    Ok(specs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFrame {
    pub c1: Point,
    pub c2: Point,
    pub c3: Point,
    pub overlap: Overlap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub label: String,
    pub signer: String,
    pub instance: u32,
    pub frames: Vec<GroundTruthFrame>,
}

#[derive(Debug, Clone)]
pub struct RenderedInstance {
    pub frames: Vec<RgbFrame>,
    pub truth: GroundTruth,
}

pub fn signer_name(s: usize) -> String {
    format!("S{}", s + 1)
}

fn jitter(t: &Trajectory, region: &Region, amount: f64, rng: &mut ChaCha8Rng) -> Trajectory {
    if amount == 0.0 {
        return t.clone();
    }
    t.map_points(|p| {
        let d = Point::new(rng.random_range(-amount..=amount), rng.random_range(-amount..=amount));
        region.clamp(Point::new(p.x + d.x, p.y + d.y))
    })
}

fn ellipse_pixels(c: Point, rx: f64, ry: f64, w: usize, h: usize) -> Vec<(usize, usize)> {
    let y0 = (c.y - ry).floor().max(0.0) as usize;
    let y1 = ((c.y + ry).ceil() as usize).min(h - 1);
    let x0 = (c.x - rx).floor().max(0.0) as usize;
    let x1 = ((c.x + rx).ceil() as usize).min(w - 1);
    let mut out = Vec::new();
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = (x as f64 - c.x) / rx;
            let dy = (y as f64 - c.y) / ry;
            if dx * dx + dy * dy <= 1.0 {
                out.push((x, y));
            }
        }
    }
    out
}

/// Renders instance `instance` (0-based) of `signer` (0-based).
pub fn render_instance(spec: &SynthClassSpec, cfg: &SynthConfig, signer: usize, instance: usize, seed: u64) -> Result<RenderedInstance, SynthError> {
    spec.validate(cfg)?;
    let class_key = mix(0, &spec.label.bytes().map(u64::from).collect::<Vec<_>>());
    let mut srng = ChaCha8Rng::seed_from_u64(mix(seed, &[TAG_SIGNER, class_key, signer as u64]));
    let mut irng = ChaCha8Rng::seed_from_u64(mix(seed, &[TAG_INSTANCE, class_key, signer as u64, instance as u64]));

    let (lo, hi) = spec.duration;
    let signer_len = srng.random_range(lo..=hi);
    let manual = jitter(&spec.manual, &cfg.manual_region, cfg.signer_jitter, &mut srng);
    let non_manual = jitter(&spec.non_manual, &cfg.non_manual_region, cfg.signer_jitter, &mut srng);
    let manual = jitter(&manual, &cfg.manual_region, cfg.instance_jitter, &mut irng);
    let non_manual = jitter(&non_manual, &cfg.non_manual_region, cfg.instance_jitter, &mut irng);
    let dj = cfg.instance_duration_jitter as i64;
    let n = if dj == 0 {
        signer_len
    } else {
        (signer_len as i64 + irng.random_range(-dj..=dj)).clamp(lo as i64, hi as i64) as usize
    };

    let (w, h) = (cfg.width, cfg.height);
    let r = cfg.hand_radius;
    let face_px = ellipse_pixels(cfg.face_center, cfg.face_radii.0, cfg.face_radii.1, w, h);
    let c1 = ComponentBlob::from_pixels(&face_px).centroid;
    let mut frames = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for f in 0..n {
        let t = f as f64 / (n - 1) as f64;
        let mut m = manual.at(t);
        let nm = non_manual.at(t);
        let event = spec.overlaps.iter().find(|e| e.frame == f);
        let overlap = match event.map(|e| e.kind) {
            Some(OverlapKind::Face) => {
                m = Point::new(cfg.face_center.x, cfg.face_center.y + cfg.face_radii.1);
                Overlap::ManualFace
            }
            Some(OverlapKind::Hands) => {
                m = Point::new(nm.x + r, nm.y);
                Overlap::ManualNonManual
            }
            None => Overlap::None,
        };
        let nm_px = ellipse_pixels(nm, r, r, w, h);
        let m_px = ellipse_pixels(m, r, r, w, h);
        let mut frame = RgbFrame::filled(w, h, cfg.background);
        if cfg.noise > 0 {
            let a = cfg.noise as i16;
            for y in 0..h {
                for x in 0..w {
                    let px = frame.get(x, y).map(|c| (c as i16 + irng.random_range(-a..=a)).clamp(0, 255) as u8);
                    frame.set(x, y, px);
                }
            }
        }
        for &(x, y) in face_px.iter().chain(&nm_px).chain(&m_px) {
            frame.set(x, y, cfg.skin);
        }
        frames.push(frame);
        truth.push(GroundTruthFrame {
            c1,
            c2: ComponentBlob::from_pixels(&m_px).centroid,
            c3: ComponentBlob::from_pixels(&nm_px).centroid,
            overlap,
        });
    }
    Ok(RenderedInstance {
        frames,
        truth: GroundTruth { label: spec.label.clone(), signer: signer_name(signer), instance: instance as u32 + 1, frames: truth },
    })
}

/// Every (class, signer, instance) triple in manifest order.
pub fn dataset_plan(specs: &[SynthClassSpec], signers: usize, instances: usize) -> Vec<(usize, usize, usize)> {
    let mut plan = Vec::with_capacity(specs.len() * signers * instances);
    for c in 0..specs.len() {
        for s in 0..signers {
            for i in 0..instances {
                plan.push((c, s, i));
            }
        }
    }
    plan
}

fn check_counts(specs: &[SynthClassSpec], signers: usize, instances: usize) -> Result<(), SynthError> {
    if specs.is_empty() {
        return Err(SynthError::NoSpecs);
    }
    if signers == 0 || instances == 0 {
        return Err(SynthError::ZeroCount);
    }
    Ok(())
}

/// Renders every instance and hands it to `f` without keeping the frames.
pub fn for_each_instance<T, F>(
    specs: &[SynthClassSpec],
    cfg: &SynthConfig,
    signers: usize,
    instances: usize,
    seed: u64,
    f: F,
) -> Result<Vec<T>, SynthError>
where
    T: Send,
    F: Fn(RenderedInstance) -> T + Sync,
{
    check_counts(specs, signers, instances)?;
    dataset_plan(specs, signers, instances)
        .into_par_iter()
        .map(|(c, s, i)| render_instance(&specs[c], cfg, s, i, seed).map(&f))
        .collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io { path: path.to_owned(), source }
}

pub const MANIFEST_NAME: &str = "manifest.jsonl";
pub const GROUND_TRUTH_NAME: &str = "groundtruth.json";

/// Writes frames as `<label>/<signer>/<nnn>/frame_XXXX.png`, a ground-truth
/// sidecar per instance directory, and the manifest at `out/manifest.jsonl`.
pub fn generate_dataset(
    specs: &[SynthClassSpec],
    cfg: &SynthConfig,
    signers: usize,
    instances: usize,
    seed: u64,
    out: &Path,
) -> Result<DatasetManifest, SynthError> {
    check_counts(specs, signers, instances)?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let entries = dataset_plan(specs, signers, instances)
        .into_par_iter()
        .map(|(c, s, i)| -> Result<InstanceEntry, SynthError> {
            let r = render_instance(&specs[c], cfg, s, i, seed)?;
            let rel = PathBuf::from(&r.truth.label).join(&r.truth.signer).join(format!("{:03}", r.truth.instance));
            let dir = out.join(&rel);
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            let mut names = Vec::with_capacity(r.frames.len());
            for (f, frame) in r.frames.iter().enumerate() {
                let name = format!("frame_{f:04}.png");
                frame.save_png(&dir.join(&name))?;
                names.push(name);
            }
            let gt_path = dir.join(GROUND_TRUTH_NAME);
            let json = serde_json::to_string_pretty(&r.truth).expect("ground truth serializes");
            fs::write(&gt_path, json).map_err(io_err(&gt_path))?;
            Ok(InstanceEntry {
                label: r.truth.label,
                signer: r.truth.signer,
                instance: r.truth.instance,
                dir: rel,
                frames: names,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let manifest = DatasetManifest { root: out.to_owned(), entries };
    manifest.save(&out.join(MANIFEST_NAME))?;
    Ok(manifest)
}
