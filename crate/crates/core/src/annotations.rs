//! Chord annotations: `.lab` files, Harte chord labels, chroma templates and
//! the major/minor class reduction.

use std::collections::BTreeSet;
use std::fmt;

use ndarray::Array2;

use crate::{Error, Result};

pub const PITCH_CLASS_NAMES: [&str; 12] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

/// 24 major/minor classes plus no-chord.
pub const N_CLASSES: usize = 25;
pub const NO_CHORD_INDEX: usize = 24;
pub const EXCLUDED_BYTE: u8 = 255;

/// Semitone offsets of scale degrees 1..=13 above the root.
const DEGREE_SEMITONES: [i32; 13] = [0, 2, 4, 5, 7, 9, 11, 12, 14, 16, 17, 19, 21];

/// Harte quality shorthands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quality {
    Maj,
    Min,
    Dim,
    Aug,
    Maj7,
    Min7,
    Dom7,
    Dim7,
    HalfDim7,
    MinMaj7,
    Maj6,
    Min6,
    Dom9,
    Maj9,
    Min9,
    Dom11,
    Dom13,
    Sus2,
    Sus4,
    Power,
    /// Root only (`C:1`), or a bare degree list such as `C(1,b3,5)`.
    Root,
}

impl Quality {
    const ALL: [Quality; 21] = [
        Quality::Maj,
        Quality::Min,
        Quality::Dim,
        Quality::Aug,
        Quality::Maj7,
        Quality::Min7,
        Quality::Dom7,
        Quality::Dim7,
        Quality::HalfDim7,
        Quality::MinMaj7,
        Quality::Maj6,
        Quality::Min6,
        Quality::Dom9,
        Quality::Maj9,
        Quality::Min9,
        Quality::Dom11,
        Quality::Dom13,
        Quality::Sus2,
        Quality::Sus4,
        Quality::Power,
        Quality::Root,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Quality::Maj => "maj",
            Quality::Min => "min",
            Quality::Dim => "dim",
            Quality::Aug => "aug",
            Quality::Maj7 => "maj7",
            Quality::Min7 => "min7",
            Quality::Dom7 => "7",
            Quality::Dim7 => "dim7",
            Quality::HalfDim7 => "hdim7",
            Quality::MinMaj7 => "minmaj7",
            Quality::Maj6 => "maj6",
            Quality::Min6 => "min6",
            Quality::Dom9 => "9",
            Quality::Maj9 => "maj9",
            Quality::Min9 => "min9",
            Quality::Dom11 => "11",
            Quality::Dom13 => "13",
            Quality::Sus2 => "sus2",
            Quality::Sus4 => "sus4",
            Quality::Power => "5",
            Quality::Root => "1",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|q| q.token() == token)
    }

    /// Semitones above the root.
    pub fn intervals(self) -> &'static [u8] {
        match self {
            Quality::Maj => &[0, 4, 7],
            Quality::Min => &[0, 3, 7],
            Quality::Dim => &[0, 3, 6],
            Quality::Aug => &[0, 4, 8],
            Quality::Maj7 => &[0, 4, 7, 11],
            Quality::Min7 => &[0, 3, 7, 10],
            Quality::Dom7 => &[0, 4, 7, 10],
            Quality::Dim7 => &[0, 3, 6, 9],
            Quality::HalfDim7 => &[0, 3, 6, 10],
            Quality::MinMaj7 => &[0, 3, 7, 11],
            Quality::Maj6 => &[0, 4, 7, 9],
            Quality::Min6 => &[0, 3, 7, 9],
            Quality::Dom9 => &[0, 4, 7, 10, 2],
            Quality::Maj9 => &[0, 4, 7, 11, 2],
            Quality::Min9 => &[0, 3, 7, 10, 2],
            Quality::Dom11 => &[0, 4, 7, 10, 2, 5],
            Quality::Dom13 => &[0, 4, 7, 10, 2, 9],
            Quality::Sus2 => &[0, 2, 7],
            Quality::Sus4 => &[0, 5, 7],
            Quality::Power => &[0, 7],
            Quality::Root => &[0],
        }
    }

    fn third(self) -> Option<Third> {
        match self {
            Quality::Maj
            | Quality::Aug
            | Quality::Maj7
            | Quality::Dom7
            | Quality::Maj6
            | Quality::Dom9
            | Quality::Maj9
            | Quality::Dom11
            | Quality::Dom13 => Some(Third::Major),
            Quality::Min
            | Quality::Dim
            | Quality::Min7
            | Quality::Dim7
            | Quality::HalfDim7
            | Quality::MinMaj7
            | Quality::Min6
            | Quality::Min9 => Some(Third::Minor),
            Quality::Sus2 | Quality::Sus4 | Quality::Power | Quality::Root => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Third {
    Major,
    Minor,
}

/// A scale degree with accidentals, e.g. `b7` or `#11`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Degree {
    pub number: u8,
    pub shift: i8,
}

impl Degree {
    pub fn semitones(self) -> u8 {
        (DEGREE_SEMITONES[self.number as usize - 1] + self.shift as i32).rem_euclid(12) as u8
    }

    fn parse(text: &str) -> Option<Self> {
        let digits_at = text.find(|c: char| c.is_ascii_digit())?;
        let (acc, num) = text.split_at(digits_at);
        let mut shift = 0i8;
        for c in acc.chars() {
            match c {
                '#' => shift += 1,
                'b' => shift -= 1,
                _ => return None,
            }
        }
        let number: u8 = num.parse().ok()?;
        (1..=13).contains(&number).then_some(Self { number, shift })
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let acc = if self.shift >= 0 { "#" } else { "b" };
        for _ in 0..self.shift.unsigned_abs() {
            f.write_str(acc)?;
        }
        write!(f, "{}", self.number)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChordSymbol {
    /// `N`
    NoChord,
    /// `X`: chord present but not annotatable.
    Unknown,
    Chord {
        /// Pitch class, 0 = C.
        root: u8,
        quality: Quality,
        /// Degrees added in parentheses.
        extra_degrees: BTreeSet<Degree>,
        /// Degrees removed with `*` in parentheses.
        omitted_degrees: BTreeSet<Degree>,
        bass: Option<Degree>,
    },
}

impl ChordSymbol {
    pub fn chord(root: u8, quality: Quality) -> Self {
        ChordSymbol::Chord {
            root: root % 12,
            quality,
            extra_degrees: BTreeSet::new(),
            omitted_degrees: BTreeSet::new(),
            bass: None,
        }
    }

    pub fn root(&self) -> Option<u8> {
        match self {
            ChordSymbol::Chord { root, .. } => Some(*root),
            _ => None,
        }
    }

    /// Pitch classes sounding in the chord, bass excluded.
    pub fn pitch_classes(&self) -> BTreeSet<u8> {
        match self {
            ChordSymbol::NoChord | ChordSymbol::Unknown => BTreeSet::new(),
            ChordSymbol::Chord {
                root,
                quality,
                extra_degrees,
                omitted_degrees,
                ..
            } => {
                let mut intervals: BTreeSet<u8> = quality.intervals().iter().copied().collect();
                intervals.extend(extra_degrees.iter().map(|d| d.semitones()));
                for d in omitted_degrees {
                    intervals.remove(&d.semitones());
                }
                intervals.insert(0);
                intervals.into_iter().map(|i| (root + i) % 12).collect()
            }
        }
    }
}

impl fmt::Display for ChordSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChordSymbol::NoChord => f.write_str("N"),
            ChordSymbol::Unknown => f.write_str("X"),
            ChordSymbol::Chord {
                root,
                quality,
                extra_degrees,
                omitted_degrees,
                bass,
            } => {
                write!(f, "{}:{}", PITCH_CLASS_NAMES[*root as usize], quality.token())?;
                if !extra_degrees.is_empty() || !omitted_degrees.is_empty() {
                    let list: Vec<String> = extra_degrees
                        .iter()
                        .map(|d| d.to_string())
                        .chain(omitted_degrees.iter().map(|d| format!("*{d}")))
                        .collect();
                    write!(f, "({})", list.join(","))?;
                }
                if let Some(b) = bass {
                    write!(f, "/{b}")?;
                }
                Ok(())
            }
        }
    }
}

fn label_error(label: &str, msg: impl Into<String>) -> Error {
    Error::ChordLabel {
        label: label.to_string(),
        msg: msg.into(),
    }
}

/// Parses `ROOT[:QUALITY][(DEGREES)][/BASS]`, `N` or `X`.
pub fn parse_chord(label: &str) -> Result<ChordSymbol> {
    let label = label.trim();
    match label {
        "N" => return Ok(ChordSymbol::NoChord),
        "X" => return Ok(ChordSymbol::Unknown),
        "" => return Err(label_error(label, "empty label")),
        _ => {}
    }

    let (body, bass) = match label.split_once('/') {
        Some((body, bass)) => (body, Some(bass)),
        None => (label, None),
    };

    let mut chars = body.char_indices().peekable();
    let natural = match chars.next() {
        Some((_, c @ 'A'..='G')) => c,
        _ => return Err(label_error(label, "unknown root")),
    };
    let mut root = match natural {
        'C' => 0i32,
        'D' => 2,
        'E' => 4,
        'F' => 5,
        'G' => 7,
        'A' => 9,
        _ => 11,
    };
    let mut rest_at = 1;
    while let Some(&(i, c)) = chars.peek() {
        match c {
            '#' => root += 1,
            'b' => root -= 1,
            _ => break,
        }
        rest_at = i + 1;
        chars.next();
    }
    let root = root.rem_euclid(12) as u8;
    let rest = &body[rest_at..];

    let (shorthand, degree_list) = match rest.find('(') {
        Some(open) => {
            if !rest.ends_with(')') {
                return Err(label_error(label, "unbalanced parentheses"));
            }
            (&rest[..open], Some(&rest[open + 1..rest.len() - 1]))
        }
        None => (rest, None),
    };

    let quality = match shorthand {
        "" if degree_list.is_some() => Quality::Root,
        "" => Quality::Maj,
        s => {
            let token = s
                .strip_prefix(':')
                .ok_or_else(|| label_error(label, "expected ':' after the root"))?;
            if token.is_empty() && degree_list.is_some() {
                Quality::Root
            } else {
                Quality::from_token(token)
                    .ok_or_else(|| label_error(label, format!("unknown quality {token:?}")))?
            }
        }
    };

    let mut extra_degrees = BTreeSet::new();
    let mut omitted_degrees = BTreeSet::new();
    if let Some(list) = degree_list {
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (omit, text) = match item.strip_prefix('*') {
                Some(t) => (true, t),
                None => (false, item),
            };
            let d = Degree::parse(text).ok_or_else(|| label_error(label, format!("bad degree {item:?}")))?;
            if omit {
                omitted_degrees.insert(d);
            } else {
                extra_degrees.insert(d);
            }
        }
    }

    let bass = match bass {
        None => None,
        Some(b) => Some(Degree::parse(b).ok_or_else(|| label_error(label, format!("bad bass degree {b:?}")))?),
    };

    Ok(ChordSymbol::Chord {
        root,
        quality,
        extra_degrees,
        omitted_degrees,
        bass,
    })
}

/// Binary 12-vector of a chord's pitch classes, index 0 = C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TargetChroma(pub [u8; 12]);

impl TargetChroma {
    pub fn as_f64(&self) -> [f64; 12] {
        self.0.map(f64::from)
    }

    pub fn active(&self) -> Vec<usize> {
        (0..12).filter(|&i| self.0[i] == 1).collect()
    }
}

/// Chroma template of the full chord (extensions included, bass ignored).
pub fn chord_template(symbol: &ChordSymbol) -> TargetChroma {
    let mut bits = [0u8; 12];
    for pc in symbol.pitch_classes() {
        bits[pc as usize] = 1;
    }
    TargetChroma(bits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChordClass {
    Major(u8),
    Minor(u8),
    NoChord,
    /// Labels with no major/minor interpretation (`X`, sus, power chords).
    Excluded,
}

impl ChordClass {
    /// 0–11 major by root, 12–23 minor by root, 24 no-chord.
    pub fn index(self) -> Option<usize> {
        match self {
            ChordClass::Major(r) => Some(r as usize),
            ChordClass::Minor(r) => Some(12 + r as usize),
            ChordClass::NoChord => Some(NO_CHORD_INDEX),
            ChordClass::Excluded => None,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0..=11 => Some(ChordClass::Major(i as u8)),
            12..=23 => Some(ChordClass::Minor(i as u8 - 12)),
            NO_CHORD_INDEX => Some(ChordClass::NoChord),
            _ => None,
        }
    }

    pub fn to_byte(self) -> u8 {
        self.index().map_or(EXCLUDED_BYTE, |i| i as u8)
    }

    pub fn from_byte(b: u8) -> Result<Self> {
        if b == EXCLUDED_BYTE {
            return Ok(ChordClass::Excluded);
        }
        Self::from_index(b as usize).ok_or_else(|| Error::Format(format!("class byte {b} out of range")))
    }

    pub fn is_excluded(self) -> bool {
        self == ChordClass::Excluded
    }

    /// Template of the reduced triad; used only for oracles and classes.
    pub fn symbol(self) -> Option<ChordSymbol> {
        match self {
            ChordClass::Major(r) => Some(ChordSymbol::chord(r, Quality::Maj)),
            ChordClass::Minor(r) => Some(ChordSymbol::chord(r, Quality::Min)),
            ChordClass::NoChord => Some(ChordSymbol::NoChord),
            ChordClass::Excluded => None,
        }
    }
}

impl fmt::Display for ChordClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChordClass::Major(r) => write!(f, "{}:maj", PITCH_CLASS_NAMES[*r as usize]),
            ChordClass::Minor(r) => write!(f, "{}:min", PITCH_CLASS_NAMES[*r as usize]),
            ChordClass::NoChord => f.write_str("N"),
            ChordClass::Excluded => f.write_str("X"),
        }
    }
}

/// Maps a chord onto the 24 major/minor classes plus no-chord by its third.
pub fn reduce_majmin(symbol: &ChordSymbol) -> ChordClass {
    match symbol {
        ChordSymbol::NoChord => ChordClass::NoChord,
        ChordSymbol::Unknown => ChordClass::Excluded,
        ChordSymbol::Chord {
            root,
            quality,
            extra_degrees,
            omitted_degrees,
            ..
        } => {
            let third = if omitted_degrees.iter().any(|d| d.number == 3) {
                None
            } else if let Some(t) = quality.third() {
                Some(t)
            } else {
                // bare degree lists: judge by the listed third, if any
                extra_degrees
                    .iter()
                    .find(|d| d.number == 3)
                    .and_then(|d| match d.shift {
                        0 => Some(Third::Major),
                        -1 => Some(Third::Minor),
                        _ => None,
                    })
            };
            match third {
                Some(Third::Major) => ChordClass::Major(*root),
                Some(Third::Minor) => ChordClass::Minor(*root),
                None => ChordClass::Excluded,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChordSegment {
    pub start: f64,
    pub end: f64,
    pub symbol: ChordSymbol,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChordAnnotation {
    pub song_id: String,
    /// Sorted by start and non-overlapping.
    pub segments: Vec<ChordSegment>,
}

impl ChordAnnotation {
    pub fn new(song_id: impl Into<String>, mut segments: Vec<ChordSegment>) -> Result<Self> {
        for (i, s) in segments.iter().enumerate() {
            if !(s.start.is_finite() && s.end.is_finite()) || s.start < 0.0 || s.end <= s.start {
                return Err(Error::Annotation {
                    line: i + 1,
                    msg: format!("invalid interval {}..{}", s.start, s.end),
                });
            }
        }
        segments.sort_by(|a, b| a.start.total_cmp(&b.start));
        for (i, w) in segments.windows(2).enumerate() {
            if w[1].start < w[0].end {
                return Err(Error::Annotation {
                    line: i + 2,
                    msg: format!("segment at {} overlaps the one ending at {}", w[1].start, w[0].end),
                });
            }
        }
        Ok(Self {
            song_id: song_id.into(),
            segments,
        })
    }

    /// End of the last segment, in seconds.
    pub fn end_time(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end)
    }

    /// The segment covering `time` under half-open `[start, end)` intervals.
    pub fn symbol_at(&self, time: f64) -> Option<&ChordSymbol> {
        let i = self.segments.partition_point(|s| s.start <= time);
        let seg = self.segments.get(i.checked_sub(1)?)?;
        (time < seg.end).then_some(&seg.symbol)
    }

    /// Serialises as `.lab` text; `parse_lab` of the result reproduces `self`.
    pub fn to_lab(&self) -> String {
        let mut out = String::new();
        for s in &self.segments {
            out.push_str(&format!("{} {} {}\n", s.start, s.end, s.symbol));
        }
        out
    }
}

/// Parses `.lab` text: one `start end label` triple per line.
pub fn parse_lab(text: &str) -> Result<ChordAnnotation> {
    parse_lab_with_id(text, "")
}

pub fn parse_lab_with_id(text: &str, song_id: &str) -> Result<ChordAnnotation> {
    let mut segments = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(a), Some(b), Some(label), None) = (fields.next(), fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Annotation {
                line: line_no,
                msg: "expected `start end label`".into(),
            });
        };
        let parse_time = |s: &str| {
            s.parse::<f64>().map_err(|_| Error::Annotation {
                line: line_no,
                msg: format!("malformed number {s:?}"),
            })
        };
        let (start, end) = (parse_time(a)?, parse_time(b)?);
        if !(start.is_finite() && end.is_finite()) || start < 0.0 || end <= start {
            return Err(Error::Annotation {
                line: line_no,
                msg: format!("end {end} is not after start {start}"),
            });
        }
        let symbol = parse_chord(label).map_err(|e| Error::Annotation {
            line: line_no,
            msg: e.to_string(),
        })?;
        segments.push(ChordSegment { start, end, symbol });
    }
    ChordAnnotation::new(song_id, segments)
}

/// Drops a `#` comment. `#` only starts a comment at the beginning of a line
/// or after whitespace, since it is also the sharp sign in chord labels.
fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'#' && (i == 0 || bytes[i - 1].is_ascii_whitespace()) {
            return &line[..i];
        }
    }
    line
}

/// Class of each frame, sampled at the frame centre `t / fps`. Time outside
/// every segment counts as no-chord.
pub fn frame_labels(ann: &ChordAnnotation, n_frames: usize, fps: f64) -> Vec<ChordClass> {
    (0..n_frames)
        .map(|t| {
            ann.symbol_at(t as f64 / fps)
                .map_or(ChordClass::NoChord, reduce_majmin)
        })
        .collect()
}

/// `n_frames × 12` matrix of chord templates, sampled like [`frame_labels`].
pub fn frame_targets(ann: &ChordAnnotation, n_frames: usize, fps: f64) -> Array2<f64> {
    let mut out = Array2::zeros((n_frames, 12));
    for (t, mut row) in out.rows_mut().into_iter().enumerate() {
        if let Some(sym) = ann.symbol_at(t as f64 / fps) {
            for (dst, bit) in row.iter_mut().zip(chord_template(sym).0) {
                *dst = bit as f64;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chord(label: &str) -> ChordSymbol {
        parse_chord(label).unwrap()
    }

    #[test]
    fn parses_lab_files() {
        let ann = parse_lab("0.0 2.5 C:maj\n2.5 4.0 N").unwrap();
        assert_eq!(ann.segments.len(), 2);
        assert_eq!(ann.segments[1].symbol, ChordSymbol::NoChord);
        let ann = parse_lab("# comment\n\n0.0 1.0 A:min7  # trailing\n1.0 2.0 F#:min #x\n").unwrap();
        assert_eq!(ann.segments[1].symbol.root(), Some(6));
        let ChordSymbol::Chord { root, quality, .. } = &ann.segments[0].symbol else {
            panic!()
        };
        assert_eq!((*root, *quality), (9, Quality::Min7));
    }

    #[test]
    fn rejects_bad_lab_files() {
        assert!(parse_lab("1.0 0.5 C").is_err());
        assert!(parse_lab("0.0 abc C").is_err());
        assert!(parse_lab("0.0 1.0").is_err());
        assert!(parse_lab("0.0 2.0 C\n1.0 3.0 G").is_err());
        assert!(parse_lab("0.0 1.0 H:maj").is_err());
        // unsorted input is sorted
        let ann = parse_lab("1.0 2.0 G\n0.0 1.0 C").unwrap();
        assert_eq!(ann.segments[0].start, 0.0);
    }

    #[test]
    fn parses_chord_labels() {
        assert_eq!(chord("C"), ChordSymbol::chord(0, Quality::Maj));
        assert_eq!(chord("F#:min"), ChordSymbol::chord(6, Quality::Min));
        assert_eq!(chord("Db:7"), ChordSymbol::chord(1, Quality::Dom7));
        assert_eq!(chord("Cb:maj").root(), Some(11));
        assert_eq!(chord("A:sus2"), ChordSymbol::chord(9, Quality::Sus2));
        let ChordSymbol::Chord { bass, extra_degrees, omitted_degrees, .. } = chord("G:maj(9,*5)/3") else {
            panic!()
        };
        assert_eq!(bass, Some(Degree { number: 3, shift: 0 }));
        assert!(extra_degrees.contains(&Degree { number: 9, shift: 0 }));
        assert!(omitted_degrees.contains(&Degree { number: 5, shift: 0 }));
        assert_eq!(chord("C(1,b3,5)").pitch_classes(), [0, 3, 7].into());
        for bad in ["", "H", "C:foo", "Cmaj", "C:maj(9", "C/x", "C:maj(14)", "c:maj"] {
            assert!(parse_chord(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn templates() {
        let pcs = |l: &str| chord_template(&chord(l)).active();
        assert_eq!(pcs("A:min7"), vec![0, 4, 7, 9]);
        assert_eq!(pcs("C:maj"), vec![0, 4, 7]);
        assert_eq!(pcs("F#:min"), vec![1, 6, 9]);
        assert_eq!(pcs("N"), Vec::<usize>::new());
        assert_eq!(pcs("X"), Vec::<usize>::new());
        // bass does not change the template
        assert_eq!(pcs("C:maj/5"), pcs("C:maj"));
        assert_eq!(pcs("C:maj(*5)"), vec![0, 4]);
    }

    #[test]
    fn majmin_reduction() {
        let red = |l: &str| reduce_majmin(&chord(l));
        assert_eq!(red("G:7"), ChordClass::Major(7));
        assert_eq!(red("A:min7"), ChordClass::Minor(9));
        assert_eq!(red("D:sus4"), ChordClass::Excluded);
        assert_eq!(red("D:5"), ChordClass::Excluded);
        assert_eq!(red("X"), ChordClass::Excluded);
        assert_eq!(red("N"), ChordClass::NoChord);
        assert_eq!(red("B:dim"), ChordClass::Minor(11));
        assert_eq!(red("E:aug"), ChordClass::Major(4));
        assert_eq!(red("C(1,b3,5)"), ChordClass::Minor(0));
        assert_eq!(red("C:maj(*3)"), ChordClass::Excluded);
    }

    #[test]
    fn majmin_templates_are_distinct() {
        let templates: BTreeSet<_> = (0..N_CLASSES)
            .map(|i| chord_template(&ChordClass::from_index(i).unwrap().symbol().unwrap()))
            .collect();
        assert_eq!(templates.len(), N_CLASSES);
    }

    #[test]
    fn class_indices() {
        for i in 0..N_CLASSES {
            let c = ChordClass::from_index(i).unwrap();
            assert_eq!(c.index(), Some(i));
            assert_eq!(ChordClass::from_byte(c.to_byte()).unwrap(), c);
        }
        assert_eq!(ChordClass::Excluded.to_byte(), 255);
        assert!(ChordClass::from_byte(25).is_err());
    }

    #[test]
    fn frame_sampling() {
        let ann = parse_lab("0 1 C:maj").unwrap();
        assert_eq!(frame_labels(&ann, 10, 10.0), vec![ChordClass::Major(0); 10]);
        let labels = frame_labels(&ann, 12, 10.0);
        assert_eq!(&labels[10..], &[ChordClass::NoChord; 2]);

        let ann = parse_lab("0 0.5 C:maj\n0.5 1.0 A:min").unwrap();
        let labels = frame_labels(&ann, 10, 10.0);
        assert_eq!(labels[4], ChordClass::Major(0));
        assert_eq!(labels[5], ChordClass::Minor(9));

        let ann = parse_lab("0 0.5 C:maj\n0.5 1.0 N\n1.0 2.0 A:min7").unwrap();
        let targets = frame_targets(&ann, 20, 10.0);
        assert_eq!(targets.row(0).to_vec(), vec![1., 0., 0., 0., 1., 0., 0., 1., 0., 0., 0., 0.]);
        assert!(targets.row(7).iter().all(|&v| v == 0.0));
        assert_eq!(targets.row(15).to_vec(), vec![1., 0., 0., 0., 1., 0., 0., 1., 0., 1., 0., 0.]);
    }

    fn arb_symbol() -> impl Strategy<Value = ChordSymbol> {
        let chord = (
            0u8..12,
            proptest::sample::select(Quality::ALL.to_vec()),
            proptest::collection::btree_set((1u8..=13, -1i8..=1).prop_map(|(number, shift)| Degree { number, shift }), 0..3),
            proptest::option::of((1u8..=7, -1i8..=0).prop_map(|(number, shift)| Degree { number, shift })),
        )
            .prop_map(|(root, quality, extra_degrees, bass)| ChordSymbol::Chord {
                root,
                quality,
                extra_degrees,
                omitted_degrees: BTreeSet::new(),
                bass,
            });
        prop_oneof![Just(ChordSymbol::NoChord), Just(ChordSymbol::Unknown), chord]
    }

    proptest! {
        #[test]
        fn lab_round_trip(
            symbols in proptest::collection::vec(arb_symbol(), 1..8),
            durations in proptest::collection::vec(0.01f64..10.0, 8),
        ) {
            let mut t = 0.0;
            let segments = symbols
                .into_iter()
                .zip(durations)
                .map(|(symbol, d)| {
                    let seg = ChordSegment { start: t, end: t + d, symbol };
                    t += d;
                    seg
                })
                .collect();
            let ann = ChordAnnotation::new("", segments).unwrap();
            let back = parse_lab(&ann.to_lab()).unwrap();
            prop_assert_eq!(back, ann);
        }

        #[test]
        fn template_contains_root(sym in arb_symbol()) {
            if let Some(root) = sym.root() {
                prop_assert_eq!(chord_template(&sym).0[root as usize], 1);
            }
        }

        #[test]
        fn seventh_does_not_change_class(root in 0u8..12) {
            prop_assert_eq!(
                reduce_majmin(&ChordSymbol::chord(root, Quality::Maj)),
                reduce_majmin(&ChordSymbol::chord(root, Quality::Maj7))
            );
            prop_assert_eq!(
                reduce_majmin(&ChordSymbol::chord(root, Quality::Min)),
                reduce_majmin(&ChordSymbol::chord(root, Quality::Min7))
            );
        }
    }
}
