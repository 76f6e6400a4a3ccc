//! Text serialization of a [`Knowledgebase`].
//!
//! ```text
//! signsym-kb 1
//! k 40
//! delta 0.5
//! depth 2
//! linkage average
//! threshold-mode global-max
//! similarity interval-reciprocal-v1
//! representation symbolic
//! classes <n>
//! class <threshold|none> <label as JSON string>
//! templates <n>
//! template <cluster_id> <member_count> <JSON [label, [member ids]]>
//! row <lo_1> <hi_1> ... <lo_7> <hi_7>        (k rows per template)
//! checksum sha256 <hex digest of every preceding byte>
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so a save/load cycle
//! reproduces every value bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{Interval, IntervalRow, KbError, KbParams, Knowledgebase, Linkage, Representation, SignTemplate, ThresholdMode, SIMILARITY_VERSION};
use crate::spatial::FEATURE_DIM;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "signsym-kb";

pub fn save_kb(kb: &Knowledgebase) -> String {
    let mut s = String::new();
    let p = &kb.params;
    let _ = writeln!(s, "{MAGIC} {FORMAT_VERSION}");
    let _ = writeln!(s, "k {}", p.k);
    let _ = writeln!(s, "delta {:?}", p.delta);
    let _ = writeln!(s, "depth {}", p.depth);
    let _ = writeln!(s, "linkage {}", p.linkage.name());
    let _ = writeln!(s, "threshold-mode {}", p.threshold_mode.name());
    let _ = writeln!(s, "similarity {SIMILARITY_VERSION}");
    let _ = writeln!(s, "representation {}", kb.representation.name());
    let _ = writeln!(s, "classes {}", kb.class_thresholds.len());
    for (label, th) in &kb.class_thresholds {
        let th = th.map_or_else(|| "none".to_owned(), |v| format!("{v:?}"));
        let _ = writeln!(s, "class {th} {}", json(label));
    }
    let _ = writeln!(s, "templates {}", kb.templates.len());
    for t in &kb.templates {
        let meta = serde_json::to_string(&(&t.label, &t.members)).expect("strings serialize");
        let _ = writeln!(s, "template {} {} {meta}", t.cluster_id, t.member_count);
        for row in &t.rows {
            s.push_str("row");
            for iv in row {
                let _ = write!(s, " {:?} {:?}", iv.lo, iv.hi);
            }
            s.push('\n');
        }
    }
    let digest = hex::encode(Sha256::digest(s.as_bytes()));
    let _ = writeln!(s, "checksum sha256 {digest}");
    s
}

fn json(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

pub fn save_kb_file(kb: &Knowledgebase, path: &Path) -> Result<(), KbError> {
    std::fs::write(path, save_kb(kb)).map_err(|source| KbError::Io { path: path.display().to_string(), source })
}

pub fn load_kb_file(path: &Path) -> Result<Knowledgebase, KbError> {
    let bytes = std::fs::read(path).map_err(|source| KbError::Io { path: path.display().to_string(), source })?;
    load_kb(&bytes)
}

pub fn load_kb(bytes: &[u8]) -> Result<Knowledgebase, KbError> {
    let text = std::str::from_utf8(bytes).map_err(|e| KbError::Malformed { line: 0, msg: e.to_string() })?;

    let header = text.lines().next().ok_or_else(|| KbError::Truncated("empty input".into()))?;
    match header.split_once(' ') {
        Some((MAGIC, v)) if v == FORMAT_VERSION.to_string() => {}
        Some((MAGIC, v)) => {
            return Err(KbError::VersionMismatch { found: v.to_owned(), expected: FORMAT_VERSION })
        }
        _ => return Err(KbError::Malformed { line: 1, msg: format!("not a knowledgebase header: {header:?}") }),
    }

    let body_end = text
        .trim_end_matches('\n')
        .rfind('\n')
        .map(|i| i + 1)
        .ok_or_else(|| KbError::Truncated("missing checksum line".into()))?;
    let (body, trailer) = text.split_at(body_end);
    let stored = trailer
        .trim_end_matches('\n')
        .strip_prefix("checksum sha256 ")
        .ok_or_else(|| KbError::Truncated("missing checksum line".into()))?;
    let computed = hex::encode(Sha256::digest(body.as_bytes()));
    if stored != computed {
        return Err(KbError::Checksum { stored: stored.to_owned(), computed });
    }

    Parser { lines: body.lines().enumerate().skip(1).peekable() }.parse()
}

struct Parser<'a, I: Iterator<Item = (usize, &'a str)>> {
    lines: std::iter::Peekable<I>,
}

impl<'a, I: Iterator<Item = (usize, &'a str)>> Parser<'a, I> {
    fn next_line(&mut self) -> Result<(usize, &'a str), KbError> {
        self.lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| KbError::Truncated("unexpected end of body".into()))
    }

    fn field(&mut self, key: &str) -> Result<(usize, &'a str), KbError> {
        let (line, l) = self.next_line()?;
        match l.split_once(' ') {
            Some((k, v)) if k == key => Ok((line, v)),
            _ => Err(KbError::Malformed { line, msg: format!("expected `{key} ...`, found {l:?}") }),
        }
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, KbError> {
        let (line, v) = self.field(key)?;
        v.parse().map_err(|_| KbError::Malformed { line, msg: format!("bad value for {key}: {v:?}") })
    }

    fn parse(mut self) -> Result<Knowledgebase, KbError> {
        let k: usize = self.parsed("k")?;
        let delta: f64 = self.parsed("delta")?;
        let depth: usize = self.parsed("depth")?;
        let (line, v) = self.field("linkage")?;
        let linkage = Linkage::from_name(v).ok_or_else(|| bad(line, "unknown linkage"))?;
        let (line, v) = self.field("threshold-mode")?;
        let threshold_mode = ThresholdMode::from_name(v).ok_or_else(|| bad(line, "unknown threshold mode"))?;
        let (line, v) = self.field("similarity")?;
        if v != SIMILARITY_VERSION {
            return Err(bad(line, &format!("unsupported similarity {v:?}")));
        }
        let (line, v) = self.field("representation")?;
        let representation = match v {
            "symbolic" => Representation::Symbolic,
            "crisp" => Representation::Crisp,
            _ => return Err(bad(line, "unknown representation")),
        };

        let n_classes: usize = self.parsed("classes")?;
        let mut class_thresholds = BTreeMap::new();
        for _ in 0..n_classes {
            let (line, v) = self.field("class")?;
            let (th, label) = v.split_once(' ').ok_or_else(|| bad(line, "expected threshold and label"))?;
            let th = match th {
                "none" => None,
                t => Some(t.parse::<f64>().map_err(|_| bad(line, "bad threshold"))?),
            };
            let label: String = serde_json::from_str(label).map_err(|e| bad(line, &e.to_string()))?;
            class_thresholds.insert(label, th);
        }

        let n_templates: usize = self.parsed("templates")?;
        let mut templates = Vec::with_capacity(n_templates);
        for _ in 0..n_templates {
            let (line, v) = self.field("template")?;
            let mut parts = v.splitn(3, ' ');
            let cluster_id: usize = parse_next(&mut parts, line, "cluster id")?;
            let member_count: usize = parse_next(&mut parts, line, "member count")?;
            let meta = parts.next().ok_or_else(|| bad(line, "missing template metadata"))?;
            let (label, members): (String, Vec<String>) =
                serde_json::from_str(meta).map_err(|e| bad(line, &e.to_string()))?;
            let mut rows = Vec::with_capacity(k);
            for _ in 0..k {
                let (line, v) = self.field("row")?;
                rows.push(parse_row(v, line)?);
            }
            templates.push(SignTemplate { label, cluster_id, rows, member_count, members });
        }
        if let Some((i, l)) = self.lines.next() {
            return Err(bad(i + 1, &format!("trailing content {l:?}")));
        }
        Ok(Knowledgebase {
            params: KbParams { k, delta, depth, linkage, threshold_mode },
            representation,
            class_thresholds,
            templates,
        })
    }
}

fn bad(line: usize, msg: &str) -> KbError {
    KbError::Malformed { line, msg: msg.to_owned() }
}

fn parse_next<'s, T: std::str::FromStr>(
    parts: &mut impl Iterator<Item = &'s str>,
    line: usize,
    what: &str,
) -> Result<T, KbError> {
    parts
        .next()
        .and_then(|p| p.parse().ok())
        .ok_or_else(|| bad(line, &format!("bad {what}")))
}

fn parse_row(v: &str, line: usize) -> Result<IntervalRow, KbError> {
    let nums: Vec<f64> = v
        .split(' ')
        .map(|t| t.parse::<f64>().map_err(|_| bad(line, &format!("bad number {t:?}"))))
        .collect::<Result<_, _>>()?;
    if nums.len() != 2 * FEATURE_DIM {
        return Err(bad(line, &format!("expected {} numbers, found {}", 2 * FEATURE_DIM, nums.len())));
    }
    let mut row = [Interval::point(0.0); FEATURE_DIM];
    for (f, iv) in row.iter_mut().enumerate() {
        let (lo, hi) = (nums[2 * f], nums[2 * f + 1]);
        if lo.partial_cmp(&hi).is_none_or(|o| o.is_gt()) {
            return Err(bad(line, &format!("interval [{lo}, {hi}] has lower > upper")));
        }
        *iv = Interval { lo, hi };
    }
    Ok(row)
}
