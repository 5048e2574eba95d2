//! Binary PGM/PPM rendering of chromagrams and saliency maps.
//!
//! Images have one pixel per cell: time runs left to right and the last
//! feature row (pitch class B, or the highest band) is at the top.

use ndarray::{ArrayView2, Axis};

use crate::{Error, Result};

/// Grayscale `P5` image of a `frames × rows` matrix: the minimum maps to
/// white and the maximum to black. A constant matrix renders all white.
pub fn grayscale_pgm(data: ArrayView2<f64>) -> Result<Vec<u8>> {
    check(data)?;
    let (frames, rows) = data.dim();
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = format!("P5\n{frames} {rows}\n255\n").into_bytes();
    for r in (0..rows).rev() {
        for t in 0..frames {
            let level = if hi > lo { (data[[t, r]] - lo) / (hi - lo) } else { 0.0 };
            out.push(255 - (255.0 * level).round() as u8);
        }
    }
    Ok(out)
}

/// Colour of a signed value scaled by `max_abs`: red for positive, blue for
/// negative, white for zero.
pub fn diverging_rgb(value: f64, max_abs: f64) -> [u8; 3] {
    if max_abs <= 0.0 || value == 0.0 {
        return [255; 3];
    }
    let s = (value.abs() / max_abs).min(1.0);
    let fade = 255 - (255.0 * s).round() as u8;
    if value > 0.0 {
        [255, fade, fade]
    } else {
        [fade, fade, 255]
    }
}

/// Colour `P6` image of signed `frames × bands` maps placed side by side,
/// scaled symmetrically by the largest magnitude over all of them.
pub fn diverging_ppm(maps: &[ArrayView2<f64>]) -> Result<Vec<u8>> {
    let first = maps.first().ok_or_else(|| Error::InvalidParameter("nothing to render".into()))?;
    let bands = first.ncols();
    for m in maps {
        check(*m)?;
        if m.ncols() != bands {
            return Err(Error::Dimension("maps differ in height".into()));
        }
    }
    let max_abs = maps
        .iter()
        .flat_map(|m| m.iter())
        .fold(0.0f64, |a, v| a.max(v.abs()));
    let width: usize = maps.iter().map(|m| m.nrows()).sum();
    let mut out = format!("P6\n{width} {bands}\n255\n").into_bytes();
    for b in (0..bands).rev() {
        for m in maps {
            for v in m.index_axis(Axis(1), b) {
                out.extend_from_slice(&diverging_rgb(*v, max_abs));
            }
        }
    }
    Ok(out)
}

fn check(data: ArrayView2<f64>) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Dimension("cannot render an empty matrix".into()));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("image data".into()));
    }
    Ok(())
}

/// Splits a binary PNM image into `(magic, width, height, pixel bytes)`.
pub fn parse_pnm(bytes: &[u8]) -> Result<(String, usize, usize, &[u8])> {
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated image header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad header field {s:?}")));
    let (w, h) = (num(&fields[1])?, num(&fields[2])?);
    Ok((fields[0].clone(), w, h, &bytes[(pos + 1).min(bytes.len())..]))
}
