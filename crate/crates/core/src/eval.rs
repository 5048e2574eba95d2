//! WCSR scoring, fold construction and the cross-validation driver.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use ndarray::{concatenate, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::annotations::{reduce_majmin, ChordAnnotation, ChordClass};
use crate::classifier::{predict_frames, train_logreg, ClassifierConfig, LogRegModel};
use crate::corpus::Song;
use crate::extractor::{train_extractor, ExtractorConfig};
use crate::features::{
    context_frames_for, deep_chroma, fold_chroma, fold_chroma_weighted_log, ideal_chroma, stack_for_classifier,
};
use crate::formats::write_atomic;
use crate::{Error, Result, FPS};

/// Correct and mappable time of one song, in frames of `1 / FPS` seconds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SongScore {
    pub song_id: String,
    pub fold: usize,
    pub correct_frames: usize,
    pub mappable_frames: usize,
}

impl SongScore {
    pub fn correct_s(&self) -> f64 {
        self.correct_frames as f64 / FPS
    }

    pub fn mappable_s(&self) -> f64 {
        self.mappable_frames as f64 / FPS
    }

    /// `None` when every reference frame is excluded.
    pub fn wcsr(&self) -> Option<f64> {
        (self.mappable_frames > 0).then(|| self.correct_frames as f64 / self.mappable_frames as f64)
    }
}

/// Duration-weighted recall over a set of songs.
pub fn total_wcsr<'a>(scores: impl IntoIterator<Item = &'a SongScore>) -> Option<f64> {
    let (c, m) = scores
        .into_iter()
        .fold((0usize, 0usize), |(c, m), s| (c + s.correct_frames, m + s.mappable_frames));
    (m > 0).then(|| c as f64 / m as f64)
}

/// Scores frame-wise predictions against a reference annotation.
///
/// Frame `t` stands for `1 / FPS` seconds centred at `t / FPS`; frames are
/// scored while the centre lies before the end of the annotation. Missing
/// predictions count as no-chord, surplus ones are ignored, and frames whose
/// reference reduces to EXCLUDED are left out of both totals.
pub fn wcsr(predictions: &[ChordClass], reference: &ChordAnnotation) -> Result<SongScore> {
    if reference.segments.is_empty() {
        return Err(Error::Data(format!("song {} has an empty annotation", reference.song_id)));
    }
    let n = (reference.end_time() * FPS).ceil() as usize;
    let mut correct = 0;
    let mut mappable = 0;
    for t in 0..n {
        let truth = reference
            .symbol_at(t as f64 / FPS)
            .map_or(ChordClass::NoChord, reduce_majmin);
        if truth.is_excluded() {
            continue;
        }
        mappable += 1;
        if predictions.get(t).copied().unwrap_or(ChordClass::NoChord) == truth {
            correct += 1;
        }
    }
    Ok(SongScore {
        song_id: reference.song_id.clone(),
        fold: 0,
        correct_frames: correct,
        mappable_frames: mappable,
    })
}

/// Song-to-fold assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub k: usize,
    /// Fold of each song, by song index.
    pub assignment: Vec<usize>,
}

/// Song indices used by one cross-validation rotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rotation {
    pub test_fold: usize,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle, then round-robin assignment. When `groups` is given,
/// songs are ordered by group before dealing so every group spreads evenly
/// over the folds.
pub fn make_folds(n_songs: usize, groups: Option<&[String]>, k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {k}")));
    }
    if n_songs < k {
        return Err(Error::InvalidParameter(format!("{n_songs} songs cannot fill {k} folds")));
    }
    if let Some(g) = groups {
        if g.len() != n_songs {
            return Err(Error::Dimension(format!("{} group tags for {n_songs} songs", g.len())));
        }
    }
    let mut order: Vec<usize> = (0..n_songs).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    if let Some(g) = groups {
        order.sort_by(|&a, &b| g[a].cmp(&g[b]));
    }
    let mut assignment = vec![0; n_songs];
    for (pos, &song) in order.iter().enumerate() {
        assignment[song] = pos % k;
    }
    Ok(FoldSplit { k, assignment })
}

impl FoldSplit {
    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    /// Test on `test_fold`; validate on the next fold and train on the rest.
    /// With two folds the validation songs are the first fifth (rounded up)
    /// of the other fold instead.
    pub fn rotation(&self, test_fold: usize) -> Rotation {
        let test = self.members(test_fold);
        if self.k == 2 {
            let rest = self.members(1 - test_fold);
            let n_val = rest.len().div_ceil(5);
            return Rotation {
                test_fold,
                val: rest[..n_val].to_vec(),
                train: rest[n_val..].to_vec(),
                test,
            };
        }
        let val_fold = (test_fold + 1) % self.k;
        let train = (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != test_fold && self.assignment[i] != val_fold)
            .collect();
        Rotation {
            test_fold,
            train,
            val: self.members(val_fold),
            test,
        }
    }

    pub fn rotations(&self) -> Vec<Rotation> {
        (0..self.k).map(|f| self.rotation(f)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    /// Deep chroma from an extractor trained per rotation.
    Deep,
    /// Folded chromagram.
    Chroma,
    /// Frequency-weighted, log-compressed folded chromagram.
    WeightedLogChroma,
    /// Log quarter-tone spectrogram.
    LogSpectrogram,
    /// Chord templates of the reference annotation.
    Ideal,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 5] = [
        FeatureKind::Deep,
        FeatureKind::Chroma,
        FeatureKind::WeightedLogChroma,
        FeatureKind::LogSpectrogram,
        FeatureKind::Ideal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Deep => "deep",
            FeatureKind::Chroma => "c",
            FeatureKind::WeightedLogChroma => "cwlog",
            FeatureKind::LogSpectrogram => "slog",
            FeatureKind::Ideal => "ideal",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown feature {s:?} (deep, c, cwlog, slog, ideal)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub feature: FeatureKind,
    /// Context of the classifier input; for deep chroma, the context of the
    /// extractor, while the classifier sees a single frame.
    pub context_seconds: f64,
    pub extractor: ExtractorConfig,
    pub classifier: ClassifierConfig,
    pub weight_center_hz: f64,
    pub weight_sigma_octaves: f64,
    /// Seeds every training run; rotations derive their own streams.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            feature: FeatureKind::Deep,
            context_seconds: 1.5,
            extractor: ExtractorConfig::default(),
            classifier: ClassifierConfig::default(),
            weight_center_hz: 220.0,
            weight_sigma_octaves: 1.0,
            seed: 0,
        }
    }
}

/// Training summary of one rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationLog {
    pub test_fold: usize,
    /// `(epochs run, best epoch)` of the extractor, for deep chroma.
    pub extractor: Option<(usize, usize)>,
    pub classifier: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub feature: String,
    pub context_seconds: f64,
    /// Test-fold scores in song order.
    pub test: Vec<SongScore>,
    /// Validation-song scores, by rotation.
    pub validation: Vec<SongScore>,
    pub rotations: Vec<RotationLog>,
}

impl EvalResult {
    pub fn total(&self) -> Option<f64> {
        total_wcsr(&self.test)
    }

    pub fn validation_total(&self) -> Option<f64> {
        total_wcsr(&self.validation)
    }
}

fn rotation_seed(seed: u64, rotation: usize) -> u64 {
    seed.wrapping_add((rotation as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Per-song classifier inputs for one rotation, plus extractor statistics.
pub type FeatureFn<'a> = dyn Fn(&Rotation) -> Result<(Vec<Array2<f64>>, Option<(usize, usize)>)> + Sync + 'a;

/// Cross-validates `cfg.feature` over `songs`.
pub fn cross_validate(songs: &[Song], split: &FoldSplit, cfg: &ExperimentConfig) -> Result<EvalResult> {
    let frames = context_frames_for(cfg.context_seconds, FPS);
    let (features, classifier_frames): (Box<FeatureFn>, usize) = match cfg.feature {
        FeatureKind::Deep => {
            let extractor = |r: &Rotation| -> Result<(Vec<Array2<f64>>, Option<(usize, usize)>)> {
                let pick = |idx: &[usize]| idx.iter().map(|&i| &songs[i]).collect::<Vec<_>>();
                let ecfg = ExtractorConfig {
                    context_frames: frames,
                    seed: rotation_seed(cfg.seed, r.test_fold),
                    ..cfg.extractor.clone()
                };
                let out = train_extractor(&pick(&r.train), &pick(&r.val), &ecfg)?;
                let chroma = songs
                    .iter()
                    .map(|s| deep_chroma(&out.model, &s.s_log).map(|c| c.data))
                    .collect::<Result<Vec<_>>>()?;
                Ok((chroma, Some((out.history.len(), out.best_epoch))))
            };
            (Box::new(extractor), 1)
        }
        kind => {
            let base = songs
                .iter()
                .map(|s| base_features(s, kind, cfg))
                .collect::<Result<Vec<_>>>()?;
            let stacked: Vec<Array2<f64>> = base
                .iter()
                .map(|b| stack_for_classifier(b.view(), cfg.context_seconds, FPS).data)
                .collect();
            (Box::new(move |_: &Rotation| Ok((stacked.clone(), None))), frames)
        }
    };
    let mut result = cross_validate_with(songs, split, &cfg.classifier, cfg.seed, classifier_frames, &*features)?;
    result.feature = cfg.feature.name().to_string();
    result.context_seconds = frames as f64 / FPS;
    Ok(result)
}

/// Frame features of a fixed (non-learned) kind, before context stacking.
pub fn base_features(song: &Song, kind: FeatureKind, cfg: &ExperimentConfig) -> Result<Array2<f64>> {
    Ok(match kind {
        FeatureKind::Chroma => fold_chroma(&song.s)?.data,
        FeatureKind::WeightedLogChroma => {
            fold_chroma_weighted_log(&song.s, cfg.weight_center_hz, cfg.weight_sigma_octaves)?.data
        }
        FeatureKind::LogSpectrogram => song.s_log.data.clone(),
        FeatureKind::Ideal => ideal_chroma(&song.annotation, song.n_frames()).data,
        FeatureKind::Deep => {
            return Err(Error::InvalidParameter("deep chroma needs a trained extractor".into()));
        }
    })
}

/// Cross-validation with caller-supplied features. `features` returns one
/// matrix per song (rows aligned with the song's frames) for a rotation.
pub fn cross_validate_with(
    songs: &[Song],
    split: &FoldSplit,
    classifier: &ClassifierConfig,
    seed: u64,
    context_frames: usize,
    features: &FeatureFn,
) -> Result<EvalResult> {
    if split.assignment.len() != songs.len() {
        return Err(Error::Dimension(format!(
            "fold split covers {} songs, corpus has {}",
            split.assignment.len(),
            songs.len()
        )));
    }
    let labels: Vec<Vec<ChordClass>> = songs.iter().map(Song::labels).collect();
    let per_rotation = split
        .rotations()
        .into_par_iter()
        .map(|r| {
            let (feats, extractor) = features(&r)?;
            if feats.len() != songs.len() || feats.iter().zip(songs).any(|(f, s)| f.nrows() != s.n_frames()) {
                return Err(Error::Dimension("features do not align with song frames".into()));
            }
            let gather = |idx: &[usize]| -> Result<(Array2<f64>, Vec<ChordClass>)> {
                let views: Vec<_> = idx.iter().map(|&i| feats[i].view()).collect();
                let x = concatenate(Axis(0), &views).map_err(|e| Error::Dimension(e.to_string()))?;
                Ok((x, idx.iter().flat_map(|&i| labels[i].iter().copied()).collect()))
            };
            let (tx, ty) = gather(&r.train)?;
            let (vx, vy) = gather(&r.val)?;
            let mut ccfg = classifier.clone();
            ccfg.train.seed = rotation_seed(seed, r.test_fold) ^ 0x5bd1_e995;
            let fit = train_logreg(tx.view(), &ty, vx.view(), &vy, context_frames as u32, &ccfg)?;
            let score = |idx: &[usize]| -> Result<Vec<SongScore>> {
                idx.iter()
                    .map(|&i| score_song(&fit.model, &feats[i], &songs[i], r.test_fold))
                    .collect()
            };
            let log = RotationLog {
                test_fold: r.test_fold,
                extractor,
                classifier: (fit.history.len(), fit.best_epoch),
            };
            Ok((score(&r.test)?, score(&r.val)?, log))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut test = Vec::new();
    let mut validation = Vec::new();
    let mut rotations = Vec::new();
    for (t, v, log) in per_rotation {
        test.extend(t);
        validation.extend(v);
        rotations.push(log);
    }
    let position = |id: &str| songs.iter().position(|s| s.id == id);
    test.sort_by_key(|s| position(&s.song_id));
    Ok(EvalResult {
        feature: String::new(),
        context_seconds: context_frames as f64 / FPS,
        test,
        validation,
        rotations,
    })
}

fn score_song(model: &LogRegModel, features: &Array2<f64>, song: &Song, fold: usize) -> Result<SongScore> {
    let pred = predict_frames(model, features.view())?;
    let mut score = wcsr(&pred.classes, &song.annotation)?;
    score.fold = fold;
    Ok(score)
}

/// Cross-validates each context in turn (the validation totals drive the
/// choice of context).
pub fn sweep_context(songs: &[Song], split: &FoldSplit, cfg: &ExperimentConfig, contexts: &[f64]) -> Result<Vec<EvalResult>> {
    contexts
        .iter()
        .map(|&c| {
            cross_validate(
                songs,
                split,
                &ExperimentConfig {
                    context_seconds: c,
                    ..cfg.clone()
                },
            )
        })
        .collect()
}

fn fmt_ratio(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// `song_id,feature,fold,correct_s,mappable_s,wcsr`, one row per test song.
pub fn scores_csv(results: &[EvalResult]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(["song_id", "feature", "fold", "correct_s", "mappable_s", "wcsr"])
        .map_err(csv_err)?;
    for r in results {
        for s in &r.test {
            w.write_record([
                s.song_id.clone(),
                r.feature.clone(),
                s.fold.to_string(),
                s.correct_s().to_string(),
                s.mappable_s().to_string(),
                fmt_ratio(s.wcsr()),
            ])
            .map_err(csv_err)?;
        }
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

/// `feature,context_s,validation_wcsr,test_wcsr`, one row per context.
pub fn sweep_csv(results: &[EvalResult]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(["feature", "context_s", "validation_wcsr", "test_wcsr"])
        .map_err(csv_err)?;
    for r in results {
        w.write_record([
            r.feature.clone(),
            r.context_seconds.to_string(),
            fmt_ratio(r.validation_total()),
            fmt_ratio(r.total()),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

pub fn write_scores_csv(path: &Path, results: &[EvalResult]) -> Result<()> {
    write_atomic(path, &scores_csv(results)?)
}

pub fn write_sweep_csv(path: &Path, results: &[EvalResult]) -> Result<()> {
    write_atomic(path, &sweep_csv(results)?)
}

/// Aligned plain-text summary, one line per result.
pub fn results_table(results: &[EvalResult]) -> String {
    let pct = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{:.2}", 100.0 * x));
    let mut out = format!("{:<8} {:>9} {:>9} {:>9} {:>6}\n", "feature", "context_s", "test", "val", "songs");
    for r in results {
        let _ = writeln!(
            out,
            "{:<8} {:>9.1} {:>9} {:>9} {:>6}",
            r.feature,
            r.context_seconds,
            pct(r.total()),
            pct(r.validation_total()),
            r.test.len()
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::{parse_lab_with_id, ChordSegment, ChordSymbol, Quality};
    use crate::dsp::{QuarterToneFilterbank, QuarterToneSpectrogram, N_BANDS};
    use proptest::prelude::*;
    use rand::Rng;

    fn ann(lab: &str) -> ChordAnnotation {
        parse_lab_with_id(lab, "s").unwrap()
    }

    #[test]
    fn all_correct_and_half_correct() {
        let a = ann("0 2 C:maj\n2 4 A:min\n");
        let truth: Vec<ChordClass> = (0..40)
            .map(|t| if t < 20 { ChordClass::Major(0) } else { ChordClass::Minor(9) })
            .collect();
        assert_eq!(wcsr(&truth, &a).unwrap().wcsr(), Some(1.0));
        let half: Vec<ChordClass> = (0..40).map(|t| if t < 20 { truth[t] } else { ChordClass::NoChord }).collect();
        let s = wcsr(&half, &a).unwrap();
        assert_eq!(s.wcsr(), Some(0.5));
        assert_eq!((s.correct_s(), s.mappable_s()), (2.0, 4.0));
    }

    #[test]
    fn excluded_frames_leave_both_totals() {
        let a = ann("0 1 C:maj\n1 2 C:sus4\n2 3 X\n");
        let s = wcsr(&[ChordClass::Major(0); 30], &a).unwrap();
        assert_eq!((s.correct_frames, s.mappable_frames), (10, 10));
        assert!(wcsr(&[], &ChordAnnotation::default()).is_err());
    }

    #[test]
    fn short_predictions_are_padded_with_no_chord() {
        let a = ann("0 1 N\n1 2 C:maj\n");
        let s = wcsr(&[ChordClass::NoChord; 5], &a).unwrap();
        assert_eq!((s.correct_frames, s.mappable_frames), (10, 20));
    }

    /// Independent per-frame oracle: linear segment scan at each centre.
    fn oracle(pred: &[ChordClass], a: &ChordAnnotation) -> (usize, usize) {
        let mut c = 0;
        let mut m = 0;
        let mut t = 0usize;
        while (t as f64) / 10.0 < a.segments.last().unwrap().end {
            let centre = t as f64 / 10.0;
            let mut truth = ChordClass::NoChord;
            for seg in &a.segments {
                if seg.start <= centre && centre < seg.end {
                    truth = reduce_majmin(&seg.symbol);
                }
            }
            if truth != ChordClass::Excluded {
                m += 1;
                let p = if t < pred.len() { pred[t] } else { ChordClass::NoChord };
                if p == truth {
                    c += 1;
                }
            }
            t += 1;
        }
        (c, m)
    }

    pub(crate) fn random_case(rng: &mut ChaCha8Rng) -> (Vec<ChordClass>, ChordAnnotation) {
        let qualities = [Quality::Maj, Quality::Min, Quality::Sus4, Quality::Min7, Quality::Dom7];
        let mut segments = Vec::new();
        let mut t = rng.gen_range(0.0..0.5);
        while t < 20.0 {
            let end = t + rng.gen_range(0.05..2.0);
            let symbol = match rng.gen_range(0..8) {
                0 => ChordSymbol::NoChord,
                1 => ChordSymbol::Unknown,
                _ => ChordSymbol::chord(rng.gen_range(0..12), qualities[rng.gen_range(0..qualities.len())]),
            };
            segments.push(ChordSegment { start: t, end, symbol });
            // occasional gaps
            t = end + if rng.gen_bool(0.2) { rng.gen_range(0.0..0.3) } else { 0.0 };
        }
        let n = rng.gen_range(150..=250);
        let pred = (0..n)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    ChordClass::from_index(rng.gen_range(0..25)).unwrap()
                } else {
                    ChordClass::Major(0)
                }
            })
            .collect();
        (pred, ChordAnnotation::new("r", segments).unwrap())
    }

    #[test]
    fn matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let (pred, a) = random_case(&mut rng);
            let s = wcsr(&pred, &a).unwrap();
            assert_eq!((s.correct_frames, s.mappable_frames), oracle(&pred, &a));
        }
    }

    #[test]
    fn boundary_discretisation_under_one_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let b: f64 = rng.gen_range(0.05..5.0);
            let end = b + rng.gen_range(0.5..3.0);
            let a = ChordAnnotation::new(
                "b",
                vec![
                    ChordSegment { start: 0.0, end: b, symbol: ChordSymbol::chord(0, Quality::Maj) },
                    ChordSegment { start: b, end, symbol: ChordSymbol::chord(9, Quality::Min) },
                ],
            )
            .unwrap();
            let s = wcsr(&vec![ChordClass::Major(0); 200], &a).unwrap();
            assert!((s.correct_s() - b).abs() < 0.1, "boundary {b}: {}", s.correct_s());
        }
    }

    fn score(id: &str, c: usize, m: usize) -> SongScore {
        SongScore {
            song_id: id.into(),
            fold: 0,
            correct_frames: c,
            mappable_frames: m,
        }
    }

    proptest! {
        #[test]
        fn total_ignores_song_order(v in prop::collection::vec((0usize..500, 1usize..500), 1..20), seed in any::<u64>()) {
            let scores: Vec<SongScore> = v.iter().map(|&(c, m)| score("x", c.min(m), m)).collect();
            let mut shuffled = scores.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(total_wcsr(&scores), total_wcsr(&shuffled));
        }

        #[test]
        fn removing_a_song_at_the_corpus_ratio(v in prop::collection::vec((0usize..50, 1usize..50), 1..10), k in 1usize..5) {
            let mut scores: Vec<SongScore> = v.iter().map(|&(c, m)| score("x", c.min(m), m)).collect();
            let (c, m) = scores.iter().fold((0, 0), |(c, m), s| (c + s.correct_frames, m + s.mappable_frames));
            // a song with exactly the corpus ratio c/m
            let with = {
                let mut all = scores.clone();
                all.push(score("y", c * k, m * k));
                total_wcsr(&all)
            };
            scores.retain(|s| s.song_id == "x");
            prop_assert_eq!(with, total_wcsr(&scores));
        }
    }

    #[test]
    fn folds_partition_deterministically() {
        let split = make_folds(16, None, 8, 3).unwrap();
        for f in 0..8 {
            assert_eq!(split.members(f).len(), 2);
        }
        assert_eq!(split, make_folds(16, None, 8, 3).unwrap());
        assert_ne!(split, make_folds(16, None, 8, 4).unwrap());
        for r in split.rotations() {
            let mut all: Vec<usize> = r.train.iter().chain(&r.val).chain(&r.test).copied().collect();
            assert_eq!(r.val.len(), 2);
            assert_eq!(r.train.len(), 12);
            all.sort_unstable();
            assert_eq!(all, (0..16).collect::<Vec<_>>());
        }
        assert!(make_folds(3, None, 8, 0).is_err());
        assert!(make_folds(3, None, 1, 0).is_err());
    }

    #[test]
    fn two_fold_rotation_holds_out_a_fifth() {
        let split = make_folds(20, None, 2, 7).unwrap();
        let r = split.rotation(0);
        assert_eq!((r.train.len(), r.val.len(), r.test.len()), (8, 2, 10));
        assert!(r.val.iter().all(|i| split.assignment[*i] == 1));
    }

    #[test]
    fn groups_spread_over_folds() {
        let groups: Vec<String> = (0..24).map(|i| format!("album{}", i % 3)).collect();
        let split = make_folds(24, Some(&groups), 4, 1).unwrap();
        for f in 0..4 {
            for g in 0..3 {
                let n = split.members(f).iter().filter(|&&i| groups[i] == format!("album{g}")).count();
                assert_eq!(n, 2);
            }
        }
    }

    #[test]
    fn feature_names_round_trip() {
        for k in FeatureKind::ALL {
            assert_eq!(k.name().parse::<FeatureKind>().unwrap(), k);
        }
        assert!("cqt".parse::<FeatureKind>().is_err());
    }

    /// Songs with empty spectrograms, each visiting all 25 classes in a
    /// random order.
    fn label_only_corpus(n: usize) -> Vec<Song> {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let fb = QuarterToneFilterbank::default();
        (0..n)
            .map(|i| {
                let mut classes: Vec<usize> = (0..25).collect();
                classes.shuffle(&mut rng);
                let mut lab = String::new();
                let mut t = 0.0;
                for c in classes {
                    let len = rng.gen_range(0.5..1.5);
                    let label = ChordClass::from_index(c).unwrap().to_string();
                    lab.push_str(&format!("{t} {} {label}\n", t + len));
                    t += len;
                }
                let a = parse_lab_with_id(&lab, &format!("s{i}")).unwrap();
                let frames = (a.end_time() * FPS).ceil() as usize;
                let s = QuarterToneSpectrogram {
                    data: Array2::zeros((frames, N_BANDS)),
                    fps: FPS,
                    is_log: false,
                    center_freqs: fb.center_freqs.clone(),
                };
                Song::from_parts(&format!("s{i}"), "g", a, s).unwrap()
            })
            .collect()
    }

    #[test]
    fn oracle_features_score_perfectly() {
        let songs = label_only_corpus(8);
        let split = make_folds(songs.len(), None, 2, 0).unwrap();
        let one_hot = |_: &Rotation| -> Result<(Vec<Array2<f64>>, Option<(usize, usize)>)> {
            let f = songs
                .iter()
                .map(|s| {
                    let l = s.labels();
                    Array2::from_shape_fn((l.len(), 25), |(t, j)| f64::from(u8::from(l[t].index() == Some(j))))
                })
                .collect();
            Ok((f, None))
        };
        let mut ccfg = ClassifierConfig::default();
        ccfg.train.adam.alpha = 0.05;
        let r = cross_validate_with(&songs, &split, &ccfg, 0, 1, &one_hot).unwrap();
        assert_eq!(r.total(), Some(1.0));
        assert_eq!(r.test.len(), 8);
    }

    #[test]
    fn ideal_chroma_is_deterministic_and_csv_is_stable() {
        let songs = label_only_corpus(6);
        let split = make_folds(songs.len(), None, 2, 1).unwrap();
        let cfg = ExperimentConfig {
            feature: FeatureKind::Ideal,
            context_seconds: 0.1,
            ..ExperimentConfig::default()
        };
        let a = cross_validate(&songs, &split, &cfg).unwrap();
        let b = cross_validate(&songs, &split, &cfg).unwrap();
        assert_eq!(a, b);
        let csv = String::from_utf8(scores_csv(&[a.clone()]).unwrap()).unwrap();
        assert!(csv.starts_with("song_id,feature,fold,correct_s,mappable_s,wcsr\n"));
        assert_eq!(csv.lines().count(), 7);
        assert!(results_table(&[a]).contains("ideal"));
    }
}
