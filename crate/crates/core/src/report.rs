//! Summaries of per-song score files and paired significance tests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

/// One row of a scores CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub song_id: String,
    pub feature: String,
    pub fold: usize,
    pub correct_s: f64,
    pub mappable_s: f64,
}

impl ScoreRow {
    pub fn wcsr(&self) -> Option<f64> {
        (self.mappable_s > 0.0).then(|| self.correct_s / self.mappable_s)
    }
}

/// Parses `song_id,feature,fold,correct_s,mappable_s[,wcsr]` text.
pub fn parse_scores(text: &str) -> Result<Vec<ScoreRow>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("scores file lacks a {name:?} column")))
    };
    let (id, feat, fold, corr, map) = (col("song_id")?, col("feature")?, col("fold")?, col("correct_s")?, col("mappable_s")?);
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let bad = |what: &str| Error::Format(format!("row {}: bad {what}", i + 2));
        let num = |c: usize, what: &str| {
            field(c)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| bad(what))
        };
        let row = ScoreRow {
            song_id: field(id).to_string(),
            feature: field(feat).to_string(),
            fold: field(fold).parse().map_err(|_| bad("fold"))?,
            correct_s: num(corr, "correct_s")?,
            mappable_s: num(map, "mappable_s")?,
        };
        if row.correct_s > row.mappable_s + 1e-9 {
            return Err(bad("correct_s"));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scores(&text)
}

/// Per-song scores of one feature, keyed by song id.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultSet {
    pub feature: String,
    pub songs: BTreeMap<String, ScoreRow>,
}

impl ResultSet {
    /// Duration-weighted WCSR over all songs.
    pub fn total(&self) -> Option<f64> {
        let (c, m) = self
            .songs
            .values()
            .fold((0.0, 0.0), |(c, m), s| (c + s.correct_s, m + s.mappable_s));
        (m > 0.0).then(|| c / m)
    }

    /// Scores of songs with any mappable time, in song-id order.
    pub fn per_song(&self) -> Vec<f64> {
        self.songs.values().filter_map(ScoreRow::wcsr).collect()
    }

    /// Sample standard deviation of the per-song scores.
    pub fn per_song_std(&self) -> Option<f64> {
        sample_std(&self.per_song())
    }
}

/// Groups rows into one result set per feature, in first-seen order.
pub fn group_by_feature(rows: Vec<ScoreRow>) -> Result<Vec<ResultSet>> {
    let mut sets: Vec<ResultSet> = Vec::new();
    for row in rows {
        let idx = match sets.iter().position(|s| s.feature == row.feature) {
            Some(i) => i,
            None => {
                sets.push(ResultSet {
                    feature: row.feature.clone(),
                    songs: BTreeMap::new(),
                });
                sets.len() - 1
            }
        };
        let set = &mut sets[idx];
        if set.songs.contains_key(&row.song_id) {
            return Err(Error::Data(format!("song {} scored twice for {}", row.song_id, set.feature)));
        }
        set.songs.insert(row.song_id.clone(), row);
    }
    Ok(sets)
}

fn sample_std(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    Some((v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
}

/// Two-sided paired t-test of `a` against `b`. All-zero differences give
/// `t = 0, p = 1`; constant non-zero differences give an infinite `t` and
/// `p = 0`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("{} paired with {} scores", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::Data("a paired t-test needs at least two pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let df = n - 1.0;
    let mean = d.iter().sum::<f64>() / n;
    let sd = sample_std(&d).unwrap_or(0.0);
    if sd == 0.0 {
        return Ok(if mean == 0.0 {
            TTest { t: 0.0, df, p: 1.0 }
        } else {
            TTest {
                t: mean.signum() * f64::INFINITY,
                df,
                p: 0.0,
            }
        });
    }
    let t = mean / (sd / n.sqrt());
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest { t, df, p })
}

/// Paired test between two result sets over the same songs.
pub fn compare(a: &ResultSet, b: &ResultSet) -> Result<TTest> {
    if !a.songs.keys().eq(b.songs.keys()) {
        return Err(Error::Data(format!(
            "{} and {} were scored on different songs",
            a.feature, b.feature
        )));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = a
        .songs
        .values()
        .zip(b.songs.values())
        .filter_map(|(s, t)| Some((s.wcsr()?, t.wcsr()?)))
        .unzip();
    paired_t_test(&x, &y)
}

/// WCSR table with per-song spread, followed by a paired test for every
/// pair of features.
pub fn report(sets: &[ResultSet]) -> Result<String> {
    if sets.len() < 2 {
        return Err(Error::Data("a report needs at least two result sets".into()));
    }
    let pct = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{:.2}", 100.0 * x));
    let width = sets.iter().map(|s| s.feature.len()).max().unwrap_or(0).max(7);
    let mut out = format!("{:<width$} {:>8} {:>8} {:>6}\n", "feature", "wcsr", "std", "songs");
    for s in sets {
        let _ = writeln!(
            out,
            "{:<width$} {:>8} {:>8} {:>6}",
            s.feature,
            pct(s.total()),
            pct(s.per_song_std()),
            s.songs.len()
        );
    }
    out.push('\n');
    for (i, a) in sets.iter().enumerate() {
        for b in &sets[i + 1..] {
            let t = compare(a, b)?;
            let _ = writeln!(out, "{} vs {}: t = {:.4}, df = {}, p = {:.3e}", a.feature, b.feature, t.t, t.df, t.p);
        }
    }
    Ok(out)
}
