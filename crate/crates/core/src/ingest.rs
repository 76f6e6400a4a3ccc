//! Dataset manifests and frame loading.
//!
//! A manifest is a UTF-8 text file with one JSON object per line:
//!
//! ```text
//! # comment lines start with '#'
//! {"label":"C1","signer":"S1","instance":1,"dir":"C1/S1/001","frames":["f0000.png","f0001.png"]}
//! ```
//!
//! `dir` is relative to the directory holding the manifest. Frame names are
//! kept in lexicographic order, so zero-padded names give temporal order.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {msg}")]
    Malformed { path: PathBuf, line: usize, msg: String },
    #[error("{path}:{line}: duplicate entry ({label}, {signer}, {instance})")]
    Duplicate {
        path: PathBuf,
        line: usize,
        label: String,
        signer: String,
        instance: u32,
    },
    #[error("{path}:{line}: entry has an empty frame list")]
    EmptyFrames { path: PathBuf, line: usize },
    #[error("frame directory {0} does not exist")]
    MissingDir(PathBuf),
    #[error("frame file {0} does not exist")]
    MissingFrame(PathBuf),
    #[error("cannot decode {path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: frame is {found:?}, expected {expected:?} like the first frame")]
    DimensionMismatch {
        path: PathBuf,
        expected: (u32, u32),
        found: (u32, u32),
    },
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("no image files in {0}")]
    NoFrames(PathBuf),
}

/// One performance of one sign, as listed in a manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceEntry {
    pub label: String,
    pub signer: String,
    pub instance: u32,
    pub dir: PathBuf,
    pub frames: Vec<String>,
}

impl InstanceEntry {
    /// Stable identifier `label/signer/instance`.
    pub fn id(&self) -> String {
        format!("{}/{}/{}", self.label, self.signer, self.instance)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub entries: Vec<InstanceEntry>,
}

impl DatasetManifest {
    /// Serializes entries in manifest format.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# label, signer, instance, frame directory, frame files")?;
        for e in &self.entries {
            let line = serde_json::to_string(e).map_err(std::io::Error::other)?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), IngestError> {
        let io = |source| IngestError::Io { path: path.to_owned(), source };
        let file = fs::File::create(path).map_err(io)?;
        self.write_to(std::io::BufWriter::new(file)).map_err(io)
    }

    pub fn labels(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|e| e.label.as_str()).collect()
    }
}

/// Loads and validates a manifest. Relative frame directories resolve against
/// the manifest's parent directory.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest, IngestError> {
    let io = |source| IngestError::Io { path: path.to_owned(), source };
    let file = fs::File::open(path).map_err(io)?;
    let root = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));

    let mut entries = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io)?;
        let lineno = idx + 1;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let malformed = |msg: String| IngestError::Malformed {
            path: path.to_owned(),
            line: lineno,
            msg,
        };
        let mut entry: InstanceEntry =
            serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
        if entry.label.trim().is_empty() || entry.signer.trim().is_empty() {
            return Err(malformed("label and signer must be non-empty".into()));
        }
        if entry.instance < 1 {
            return Err(malformed("instance ordinal must be >= 1".into()));
        }
        if entry.frames.is_empty() {
            return Err(IngestError::EmptyFrames { path: path.to_owned(), line: lineno });
        }
        let key = (entry.label.clone(), entry.signer.clone(), entry.instance);
        if !seen.insert(key) {
            return Err(IngestError::Duplicate {
                path: path.to_owned(),
                line: lineno,
                label: entry.label,
                signer: entry.signer,
                instance: entry.instance,
            });
        }
        let dir = root.join(&entry.dir);
        if !dir.is_dir() {
            return Err(IngestError::MissingDir(dir));
        }
        entry.frames.sort();
        entries.push(entry);
    }
    Ok(DatasetManifest { root, entries })
}

/// An 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbFrame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl RgbFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, IngestError> {
        if width == 0 || height == 0 {
            return Err(IngestError::InvalidFrame(format!("empty frame {width}x{height}")));
        }
        if pixels.len() != 3 * width * height {
            return Err(IngestError::InvalidFrame(format!(
                "buffer holds {} bytes, {width}x{height} RGB needs {}",
                pixels.len(),
                3 * width * height
            )));
        }
        Ok(Self { width, height, pixels })
    }

    /// A frame filled with one color.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        assert!(width > 0 && height > 0);
        let pixels = rgb.iter().copied().cycle().take(3 * width * height).collect();
        Self { width, height, pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn save_png(&self, path: &Path) -> Result<(), IngestError> {
        image::save_buffer(
            path,
            &self.pixels,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|source| IngestError::Decode { path: path.to_owned(), source })
    }
}

/// Decodes a PNG or binary PPM file into an RGB frame.
pub fn load_frame(path: &Path) -> Result<RgbFrame, IngestError> {
    if !path.is_file() {
        return Err(IngestError::MissingFrame(path.to_owned()));
    }
    let decode = |source| IngestError::Decode { path: path.to_owned(), source };
    let img = image::ImageReader::open(path)
        .map_err(|source| IngestError::Io { path: path.to_owned(), source })?
        .with_guessed_format()
        .map_err(|source| IngestError::Io { path: path.to_owned(), source })?
        .decode()
        .map_err(decode)?
        .into_rgb8();
    let (w, h) = img.dimensions();
    RgbFrame::new(w as usize, h as usize, img.into_raw())
}

/// Loads an instance's frames in manifest order. All frames must share the
/// dimensions of the first.
pub fn load_frames(entry: &InstanceEntry, root: &Path) -> Result<Vec<RgbFrame>, IngestError> {
    let dir = root.join(&entry.dir);
    let paths: Vec<PathBuf> = entry.frames.iter().map(|f| dir.join(f)).collect();
    load_frame_paths(&paths)
}

/// Loads every `.png`/`.ppm` file of a directory in lexicographic order.
pub fn load_frames_from_dir(dir: &Path) -> Result<Vec<RgbFrame>, IngestError> {
    if !dir.is_dir() {
        return Err(IngestError::MissingDir(dir.to_owned()));
    }
    let io = |source| IngestError::Io { path: dir.to_owned(), source };
    let mut paths = Vec::new();
    for item in fs::read_dir(dir).map_err(io)? {
        let p = item.map_err(io)?.path();
        let is_image = p
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "ppm"))
            .unwrap_or(false);
        if is_image && p.is_file() {
            paths.push(p);
        }
    }
    if paths.is_empty() {
        return Err(IngestError::NoFrames(dir.to_owned()));
    }
    paths.sort();
    load_frame_paths(&paths)
}

fn load_frame_paths(paths: &[PathBuf]) -> Result<Vec<RgbFrame>, IngestError> {
    let mut frames: Vec<RgbFrame> = Vec::with_capacity(paths.len());
    for path in paths {
        let frame = load_frame(path)?;
        if let Some(first) = frames.first() {
            let expected = (first.width as u32, first.height as u32);
            let found = (frame.width as u32, frame.height as u32);
            if expected != found {
                return Err(IngestError::DimensionMismatch { path: path.clone(), expected, found });
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_png(path: &Path, w: usize, h: usize, rgb: [u8; 3]) {
        RgbFrame::filled(w, h, rgb).save_png(path).unwrap();
    }

    fn entry(label: &str, signer: &str, instance: u32, dir: &str, frames: &[&str]) -> InstanceEntry {
        InstanceEntry {
            label: label.into(),
            signer: signer.into(),
            instance,
            dir: dir.into(),
            frames: frames.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn loads_two_entries() {
        let tmp = tempfile::tempdir().unwrap();
        fs::create_dir_all(tmp.path().join("a")).unwrap();
        fs::create_dir_all(tmp.path().join("b")).unwrap();
        let m = DatasetManifest {
            root: tmp.path().into(),
            entries: vec![entry("A", "s1", 1, "a", &["f1.png"]), entry("B", "s1", 1, "b", &["f1.png"])],
        };
        let path = tmp.path().join("manifest.jsonl");
        m.save(&path).unwrap();
        let loaded = load_manifest(&path).unwrap();
        assert_eq!(loaded.entries.len(), 2);
        assert_eq!(loaded.entries, m.entries);
    }

    #[test]
    fn duplicate_entry_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        fs::create_dir_all(tmp.path().join("a")).unwrap();
        let m = DatasetManifest {
            root: tmp.path().into(),
            entries: vec![entry("A", "s1", 1, "a", &["f1.png"]), entry("A", "s1", 1, "a", &["f2.png"])],
        };
        let path = tmp.path().join("manifest.jsonl");
        m.save(&path).unwrap();
        assert!(matches!(load_manifest(&path), Err(IngestError::Duplicate { line: 3, .. })));
    }

    #[test]
    fn empty_frame_list_and_malformed_lines() {
        let tmp = tempfile::tempdir().unwrap();
        fs::create_dir_all(tmp.path().join("a")).unwrap();
        let path = tmp.path().join("m.jsonl");
        fs::write(&path, "{\"label\":\"A\",\"signer\":\"s\",\"instance\":1,\"dir\":\"a\",\"frames\":[]}\n").unwrap();
        assert!(matches!(load_manifest(&path), Err(IngestError::EmptyFrames { .. })));
        fs::write(&path, "# header\nnot json\n").unwrap();
        assert!(matches!(load_manifest(&path), Err(IngestError::Malformed { line: 2, .. })));
        assert!(matches!(
            load_manifest(&tmp.path().join("missing.jsonl")),
            Err(IngestError::Io { .. })
        ));
    }

    #[test]
    fn frames_sorted_lexicographically() {
        let tmp = tempfile::tempdir().unwrap();
        fs::create_dir_all(tmp.path().join("a")).unwrap();
        let path = tmp.path().join("m.jsonl");
        fs::write(
            &path,
            "{\"label\":\"A\",\"signer\":\"s\",\"instance\":1,\"dir\":\"a\",\"frames\":[\"f002.png\",\"f000.png\",\"f001.png\"]}\n",
        )
        .unwrap();
        let m = load_manifest(&path).unwrap();
        assert_eq!(m.entries[0].frames, vec!["f000.png", "f001.png", "f002.png"]);
    }

    #[test]
    fn loads_frames_in_order_with_uniform_dims() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("a");
        fs::create_dir_all(&dir).unwrap();
        for (i, c) in [[10u8, 0, 0], [20, 0, 0], [30, 0, 0]].iter().enumerate() {
            write_png(&dir.join(format!("f{i}.png")), 320, 240, *c);
        }
        let e = entry("A", "s", 1, "a", &["f0.png", "f1.png", "f2.png"]);
        let frames = load_frames(&e, tmp.path()).unwrap();
        assert_eq!(frames.len(), 3);
        for (i, f) in frames.iter().enumerate() {
            assert_eq!((f.width(), f.height()), (320, 240));
            assert_eq!(f.get(5, 5)[0], 10 * (i as u8 + 1));
        }
        // deterministic
        assert_eq!(frames, load_frames(&e, tmp.path()).unwrap());
    }

    #[test]
    fn dimension_mismatch_and_missing_file() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("a");
        fs::create_dir_all(&dir).unwrap();
        write_png(&dir.join("f0.png"), 320, 240, [1, 2, 3]);
        write_png(&dir.join("f1.png"), 640, 480, [1, 2, 3]);
        let e = entry("A", "s", 1, "a", &["f0.png", "f1.png"]);
        assert!(matches!(
            load_frames(&e, tmp.path()),
            Err(IngestError::DimensionMismatch { expected: (320, 240), found: (640, 480), .. })
        ));
        let e = entry("A", "s", 1, "a", &["f0.png", "nope.png"]);
        assert!(matches!(load_frames(&e, tmp.path()), Err(IngestError::MissingFrame(_))));
    }

    #[test]
    fn reads_binary_ppm() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("f.ppm");
        let mut bytes = b"P6\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 0, 0, 255, 0]);
        fs::write(&path, bytes).unwrap();
        let f = load_frame(&path).unwrap();
        assert_eq!((f.width(), f.height()), (2, 1));
        assert_eq!(f.get(0, 0), [255, 0, 0]);
        assert_eq!(f.get(1, 0), [0, 255, 0]);
        let frames = load_frames_from_dir(tmp.path()).unwrap();
        assert_eq!(frames.len(), 1);
    }

    #[test]
    fn frame_buffer_validation() {
        assert!(RgbFrame::new(0, 3, vec![]).is_err());
        assert!(RgbFrame::new(2, 2, vec![0; 11]).is_err());
        assert!(RgbFrame::new(2, 2, vec![0; 12]).is_ok());
    }
}
