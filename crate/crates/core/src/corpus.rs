//! Corpus manifests and per-song precomputed spectrograms.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::annotations::{frame_labels, frame_targets, parse_lab_with_id, ChordAnnotation, ChordClass};
use crate::dsp::{load_audio, log_compress, Frontend, QuarterToneSpectrogram};
use crate::formats::write_atomic;
use crate::{Error, Result, FPS};

pub const MANIFEST_NAME: &str = "manifest.txt";

/// One manifest line: `id  wav  lab  duration_s  group`, tab-separated.
/// Relative paths are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    pub wav: PathBuf,
    pub lab: PathBuf,
    pub duration: f64,
    pub group: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut out = String::from("# id\twav\tlab\tduration_s\tgroup\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:.6}\t{}",
                e.id,
                e.wav.display(),
                e.lab.display(),
                e.duration,
                e.group
            );
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(Error::Data(format!("manifest line {}: expected 5 tab-separated fields", n + 1)));
            }
            let duration = f[3]
                .parse::<f64>()
                .ok()
                .filter(|d| d.is_finite() && *d >= 0.0)
                .ok_or_else(|| Error::Data(format!("manifest line {}: bad duration {:?}", n + 1, f[3])))?;
            entries.push(ManifestEntry {
                id: f[0].to_string(),
                wav: f[1].into(),
                lab: f[2].into(),
                duration,
                group: f[4].to_string(),
            });
        }
        let mut ids: Vec<&str> = entries.iter().map(|e| e.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Data(format!("duplicate song id {}", w[0])));
        }
        Ok(Self { entries })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    /// Reads a manifest file, or `manifest.txt` inside a directory.
    pub fn read(path: &Path) -> Result<(Self, PathBuf)> {
        let file = manifest_path(path);
        let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let root = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::parse(&text)?, root))
    }
}

pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_NAME)
    } else {
        path.to_path_buf()
    }
}

/// A song with its annotation and both spectrogram variants.
#[derive(Debug, Clone)]
pub struct Song {
    pub id: String,
    pub group: String,
    pub annotation: ChordAnnotation,
    /// Linear quarter-tone spectrogram.
    pub s: QuarterToneSpectrogram,
    pub s_log: QuarterToneSpectrogram,
}

impl Song {
    pub fn from_parts(id: &str, group: &str, annotation: ChordAnnotation, s: QuarterToneSpectrogram) -> Result<Self> {
        let s_log = log_compress(&s)?;
        Ok(Self {
            id: id.to_string(),
            group: group.to_string(),
            annotation,
            s,
            s_log,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.s.n_frames()
    }

    pub fn labels(&self) -> Vec<ChordClass> {
        frame_labels(&self.annotation, self.n_frames(), FPS)
    }

    pub fn targets(&self) -> ndarray::Array2<f64> {
        frame_targets(&self.annotation, self.n_frames(), FPS)
    }
}

/// Loads every song of a manifest, in manifest order.
pub fn load_corpus(path: &Path, frontend: &Frontend) -> Result<Vec<Song>> {
    let (manifest, root) = Manifest::read(path)?;
    if manifest.entries.is_empty() {
        return Err(Error::Data("manifest lists no songs".into()));
    }
    manifest
        .entries
        .par_iter()
        .map(|e| {
            let wav = root.join(&e.wav);
            let lab = root.join(&e.lab);
            let clip = load_audio(&wav)?;
            let text = std::fs::read_to_string(&lab).map_err(|err| Error::io(&lab, err))?;
            let ann = parse_lab_with_id(&text, &e.id)?;
            Song::from_parts(&e.id, &e.group, ann, frontend.spectrogram(&clip)?)
        })
        .collect()
}
