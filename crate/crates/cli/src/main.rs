//! `signsym`: train, recognize, evaluate, generate synthetic data and inspect
//! segmentation from one TOML config.

mod config;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use signsym_core::evaluation::{
    run_holdout, run_kfold, run_loo, run_signer_independent, summarize_reports, TrialReport,
};
use signsym_core::ingest::{load_frames_from_dir, load_manifest};
use signsym_core::kb::{build_knowledgebase, load_kb_file, save_kb_file};
use signsym_core::pipeline::{build_dataset, process_frames, segment_frame};
use signsym_core::recognizer::{recognize, RecognitionResult};
use signsym_core::spatial::assign_identities;
use signsym_core::synth::{generate_dataset, random_class_specs, MANIFEST_NAME};

use crate::config::Config;

#[derive(Parser, Debug)]
#[command(name = "signsym", version, about = "Sign recognition with interval-valued symbolic templates")]
struct Cli {
    /// TOML config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the seed used by the command (evaluation or synthesis).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a knowledgebase from a manifest.
    Train {
        /// Dataset manifest; falls back to paths.manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Knowledgebase output file; falls back to paths.kb.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip instances that fail processing instead of aborting.
        #[arg(long)]
        skip_failed: bool,
    },
    /// Recognize one instance directory of frames.
    Recognize {
        /// Directory of PNG or PPM frames in file-name order.
        instance: PathBuf,
        /// Knowledgebase file; falls back to paths.kb.
        #[arg(long)]
        kb: Option<PathBuf>,
        /// True label, recorded in the report.
        #[arg(long)]
        label: Option<String>,
        /// Reject when the best score is below this value.
        #[arg(long)]
        reject: Option<f64>,
        /// Append the report line to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an evaluation protocol and write reports.
    Evaluate {
        #[arg(long, value_enum)]
        protocol: Protocol,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Report directory; falls back to paths.out.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Holdout split as TRAIN:TEST.
        #[arg(long)]
        ratio: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        /// Test instances per class per fold for k-fold.
        #[arg(long)]
        fold_size: Option<usize>,
        #[arg(long)]
        skip_failed: bool,
    },
    /// Generate a synthetic dataset with manifest and ground truth.
    Synth {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        signers: Option<usize>,
        #[arg(long)]
        instances: Option<usize>,
    },
    /// Dump cleaned skin masks and tracked centroids for one instance.
    SegmentDebug {
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the default config in canonical form.
    Config,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Protocol {
    Holdout,
    Loo,
    Kfold,
    SignerIndependent,
}

fn required(flag: Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.or_else(|| fallback.clone()).with_context(|| format!("no {what} given (flag or config paths)"))
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seeds.evaluation = s;
        cfg.seeds.synth = s;
    }
    match cli.command {
        Command::Train { manifest, out, skip_failed } => {
            let manifest = required(manifest, &cfg.paths.manifest, "manifest")?;
            let out = required(out, &cfg.paths.kb, "knowledgebase output")?;
            train(&cfg, &manifest, &out, skip_failed)
        }
        Command::Recognize { instance, kb, label, reject, out } => {
            let kb = required(kb, &cfg.paths.kb, "knowledgebase")?;
            let reject = reject.or(cfg.recognition.reject_threshold);
            cmd_recognize(&cfg, &kb, &instance, label, reject, out.as_deref())
        }
        Command::Evaluate { protocol, manifest, out, ratio, trials, fold_size, skip_failed } => {
            if let Some(r) = ratio {
                cfg.evaluation.ratio = r;
            }
            if let Some(t) = trials {
                cfg.evaluation.trials = t;
            }
            if let Some(k) = fold_size {
                cfg.evaluation.fold_size = k;
            }
            cfg.validate()?;
            let manifest = required(manifest, &cfg.paths.manifest, "manifest")?;
            let out = required(out, &cfg.paths.out, "output directory")?;
            evaluate(&cfg, protocol, &manifest, &out, skip_failed)
        }
        Command::Synth { out, classes, signers, instances } => {
            let out = required(out, &cfg.paths.out, "output directory")?;
            let s = &cfg.synth;
            synth(&cfg, &out, classes.unwrap_or(s.classes), signers.unwrap_or(s.signers), instances.unwrap_or(s.instances))
        }
        Command::SegmentDebug { instance, out } => segment_debug(&cfg, &instance, out.as_deref()),
        Command::Config => {
            print!("{}", Config::default().to_canonical());
            Ok(())
        }
    }
}

fn load_dataset(cfg: &Config, manifest: &Path, skip_failed: bool) -> Result<Vec<signsym_core::dataset::SignInstance>> {
    let m = load_manifest(manifest).with_context(|| format!("loading {}", manifest.display()))?;
    if m.entries.is_empty() {
        bail!("manifest {} has no entries", manifest.display());
    }
    let built = build_dataset(&m, &cfg.pipeline());
    if !built.failures.is_empty() {
        let list: Vec<String> = built.failures.iter().map(|e| format!("  {e}")).collect();
        if !skip_failed {
            bail!("{} instance(s) failed:\n{}", built.failures.len(), list.join("\n"));
        }
        eprintln!("skipped {} instance(s):\n{}", built.failures.len(), list.join("\n"));
    }
    if built.instances.is_empty() {
        bail!("no instance could be processed");
    }
    Ok(built.instances)
}

fn train(cfg: &Config, manifest: &Path, out: &Path, skip_failed: bool) -> Result<()> {
    let data = load_dataset(cfg, manifest, skip_failed)?;
    let refs: Vec<_> = data.iter().collect();
    let kb = build_knowledgebase(&refs, &cfg.kb_params())?;
    save_kb_file(&kb, out)?;
    for (label, n) in kb.class_counts() {
        let th = kb.class_thresholds.get(label).copied().flatten();
        match th {
            Some(th) => println!("{label}\t{n} cluster(s)\tTh={th:.6}"),
            None => println!("{label}\t{n} cluster(s)"),
        }
    }
    println!("representatives: {} from {} instances; wrote {}", kb.templates.len(), data.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct RankEntry<'a> {
    label: &'a str,
    template: usize,
    score: f64,
}

#[derive(Serialize)]
struct RecognitionReport<'a> {
    instance: String,
    true_label: Option<&'a str>,
    predicted: String,
    rejected: bool,
    best_score: f64,
    ties: usize,
    top: Vec<RankEntry<'a>>,
}

fn report<'a>(instance: &Path, truth: Option<&'a str>, r: &'a RecognitionResult) -> RecognitionReport<'a> {
    RecognitionReport {
        instance: instance.display().to_string(),
        true_label: truth,
        predicted: r.predicted.to_string(),
        rejected: r.predicted.label().is_none(),
        best_score: r.best_score,
        ties: r.ties,
        top: r.ranked.iter().take(5).map(|t| RankEntry { label: &t.label, template: t.template, score: t.score }).collect(),
    }
}

fn cmd_recognize(cfg: &Config, kb_path: &Path, instance: &Path, label: Option<String>, reject: Option<f64>, out: Option<&Path>) -> Result<()> {
    let kb = load_kb_file(kb_path).with_context(|| format!("loading {}", kb_path.display()))?;
    if kb.params.k != cfg.pipeline.k {
        bail!("knowledgebase uses K={} but the config has K={}", kb.params.k, cfg.pipeline.k);
    }
    let frames = load_frames_from_dir(instance)?;
    let processed = process_frames(&frames, &cfg.pipeline()).with_context(|| format!("processing {}", instance.display()))?;
    let result = recognize(&kb, &processed.keyframes, reject)?;
    let line = serde_json::to_string(&report(instance, label.as_deref(), &result))?;
    println!("{line}");
    if let Some(out) = out {
        let mut f = fs::OpenOptions::new().create(true).append(true).open(out).with_context(|| format!("opening {}", out.display()))?;
        writeln!(f, "{line}")?;
    }
    Ok(())
}

fn evaluate(cfg: &Config, protocol: Protocol, manifest: &Path, out: &Path, skip_failed: bool) -> Result<()> {
    let data = load_dataset(cfg, manifest, skip_failed)?;
    let params = cfg.eval_params();
    let seed = cfg.seeds.evaluation;
    let (name, reports) = match protocol {
        Protocol::Holdout => ("holdout", run_holdout(&data, &params, cfg.ratio()?, cfg.evaluation.trials, seed)?),
        Protocol::Loo => ("loo", run_loo(&data, &params, seed)?),
        Protocol::Kfold => ("kfold", run_kfold(&data, &params, cfg.evaluation.fold_size, seed)?),
        Protocol::SignerIndependent => ("signer-independent", run_signer_independent(&data, &params)?),
    };
    write_reports(out, name, &reports)?;
    for r in &reports {
        let which = match &r.held_out_signer {
            Some(s) => format!("signer {s}"),
            None => format!("run {}", r.fold.unwrap_or(0)),
        };
        println!(
            "{name} {which}: macro F {:.4}, templates {}, train {}, test {}",
            r.macro_f, r.template_count, r.train_count, r.test_count
        );
    }
    let summary = summarize_reports(&reports);
    println!("{name} overall: {summary}");
    info!("reports written to {}", out.display());
    Ok(())
}

fn write_reports(out: &Path, name: &str, reports: &[TrialReport]) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut lines = String::new();
    for (i, r) in reports.iter().enumerate() {
        lines.push_str(&r.to_json_line());
        lines.push('\n');
        fs::write(out.join(format!("{name}_{i:03}_confusion.txt")), r.confusion.to_grid())?;
        fs::write(out.join(format!("{name}_{i:03}_confusion.csv")), r.confusion.to_csv())?;
    }
    fs::write(out.join(format!("{name}_reports.jsonl")), lines)?;
    let summary = summarize_reports(reports);
    fs::write(out.join(format!("{name}_summary.json")), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(())
}

fn synth(cfg: &Config, out: &Path, classes: usize, signers: usize, instances: usize) -> Result<()> {
    let specs = random_class_specs(classes, &cfg.synth.render, cfg.seeds.synth)?;
    let m = generate_dataset(&specs, &cfg.synth.render, signers, instances, cfg.seeds.synth, out)?;
    fs::write(out.join("classes.json"), serde_json::to_string_pretty(&specs)? + "\n")?;
    println!("wrote {} instances; manifest {}", m.entries.len(), out.join(MANIFEST_NAME).display());
    Ok(())
}

fn segment_debug(cfg: &Config, instance: &Path, out: Option<&Path>) -> Result<()> {
    let frames = load_frames_from_dir(instance)?;
    let p = cfg.pipeline();
    if let Some(out) = out {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    }
    let mut all_blobs = Vec::with_capacity(frames.len());
    for (i, f) in frames.iter().enumerate() {
        let (mask, blobs) = segment_frame(f, &p)?;
        if let Some(out) = out {
            mask.save_png(&out.join(format!("mask_{i:04}.png")))?;
        }
        let desc: Vec<String> = blobs
            .iter()
            .map(|b| format!("({:.2},{:.2}) n={}", b.centroid.x, b.centroid.y, b.pixel_count))
            .collect();
        println!("frame {i:4}: {} blob(s) {}", blobs.len(), desc.join(" "));
        all_blobs.push(blobs);
    }
    match assign_identities(&all_blobs, &p.tracking) {
        Ok(tracked) => {
            for t in tracked {
                println!(
                    "track {:4}: face ({:.2},{:.2}) manual ({:.2},{:.2}) non-manual ({:.2},{:.2}) {}",
                    t.frame_index, t.c1.x, t.c1.y, t.c2.x, t.c2.y, t.c3.x, t.c3.y, t.overlap.as_str()
                );
            }
        }
        Err(e) => println!("tracking failed: {e}"),
    }
    Ok(())
}
