//! Binary containers shared by the pipeline.
//!
//! `DCF1` holds a row-major `f32` feature matrix (spectrograms, chromagrams,
//! stacked features, saliency maps). `DCL1` holds one class byte per frame.
//! Both are little-endian.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::annotations::ChordClass;
use crate::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"DCF1";
pub const LABEL_MAGIC: &[u8; 4] = b"DCL1";

/// A matrix of frames read from or destined for a `DCF1` file.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub data: Array2<f64>,
    pub fps: f32,
}

pub fn encode_features(data: &Array2<f64>, fps: f32) -> Vec<u8> {
    let (rows, cols) = data.dim();
    let mut out = Vec::with_capacity(16 + rows * cols * 4);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    out.extend_from_slice(&fps.to_le_bytes());
    for &v in data.iter() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureFile> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != FEATURE_MAGIC {
        return Err(Error::Format("missing DCF1 magic".into()));
    }
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let fps = r.f32()?;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("DCF1 header overflows".into()))?;
    if r.remaining() != n * 4 {
        return Err(Error::Format(format!(
            "DCF1 payload holds {} bytes, header promises {}",
            r.remaining(),
            n * 4
        )));
    }
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(r.f32()? as f64);
    }
    let data = Array2::from_shape_vec((rows, cols), values)
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok(FeatureFile { data, fps })
}

pub fn write_features(path: &Path, data: &Array2<f64>, fps: f32) -> Result<()> {
    write_atomic(path, &encode_features(data, fps))
}

pub fn read_features(path: &Path) -> Result<FeatureFile> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes)
}

pub fn encode_labels(labels: &[ChordClass]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(LABEL_MAGIC);
    out.extend_from_slice(&(labels.len() as u32).to_le_bytes());
    out.extend(labels.iter().map(|c| c.to_byte()));
    out
}

pub fn decode_labels(bytes: &[u8]) -> Result<Vec<ChordClass>> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != LABEL_MAGIC {
        return Err(Error::Format("missing DCL1 magic".into()));
    }
    let n = r.u32()? as usize;
    if r.remaining() != n {
        return Err(Error::Format(format!(
            "DCL1 payload holds {} labels, header promises {n}",
            r.remaining()
        )));
    }
    r.take(n)?.iter().map(|&b| ChordClass::from_byte(b)).collect()
}

pub fn write_labels(path: &Path, labels: &[ChordClass]) -> Result<()> {
    write_atomic(path, &encode_labels(labels))
}

pub fn read_labels(path: &Path) -> Result<Vec<ChordClass>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_labels(&bytes)
}

/// Writes `bytes` to a sibling temporary file and renames it into place, so a
/// failed write never leaves a partial file at `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Little-endian cursor over a byte slice.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Format("file is truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
