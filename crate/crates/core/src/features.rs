//! The compared frame features: deep chroma from a trained extractor, folded
//! chromagrams from the quarter-tone spectrogram, ideal chroma from
//! annotations, and context stacking for the linear classifier.

use ndarray::{s, Array2, ArrayView2, Axis};

use crate::annotations::{frame_targets, ChordAnnotation};
use crate::dsp::{stack_frames, QuarterToneSpectrogram, A4_HZ};
use crate::nn::Mlp;
use crate::{Error, Result, FPS};

/// Rows per inference chunk in [`deep_chroma`].
const INFER_CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChromaKind {
    Deep,
    Folded,
    Ideal,
}

/// `n_frames × 12` pitch-class saliencies, column 0 = C.
#[derive(Debug, Clone, PartialEq)]
pub struct Chromagram {
    pub data: Array2<f64>,
    pub fps: f64,
    pub kind: ChromaKind,
}

/// Classifier input: one row per annotation frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub data: Array2<f64>,
    /// Total time span represented by each row.
    pub context_seconds: f64,
}

impl FeatureMatrix {
    pub fn dim(&self) -> usize {
        self.data.ncols()
    }
}

/// Runs the extractor on every super-frame of `s_log`.
pub fn deep_chroma(model: &Mlp, s_log: &QuarterToneSpectrogram) -> Result<Chromagram> {
    if !s_log.is_log {
        return Err(Error::InvalidParameter("deep chroma is computed from S_Log".into()));
    }
    let bands = s_log.n_bands();
    let frames = match model.context_frames as usize {
        0 if bands > 0 && model.input_dim() % bands == 0 => model.input_dim() / bands,
        n => n,
    };
    if frames % 2 == 0 || frames * bands != model.input_dim() {
        return Err(Error::Dimension(format!(
            "extractor expects {} inputs ({} frames), spectrogram offers {bands} bands",
            model.input_dim(),
            frames
        )));
    }
    if model.output_dim() != 12 {
        return Err(Error::Dimension(format!("extractor emits {} values, not 12", model.output_dim())));
    }
    let n = s_log.n_frames();
    let mut data = Array2::zeros((n, 12));
    for start in (0..n).step_by(INFER_CHUNK) {
        let end = (start + INFER_CHUNK).min(n);
        // pad the chunk with its neighbours so stacking sees true context
        let side = frames / 2;
        let lo = start.saturating_sub(side);
        let hi = (end + side).min(n);
        let stacked = stack_frames(s_log.data.slice(s![lo..hi, ..]), side);
        let rows = stacked.slice(s![start - lo..end - lo, ..]);
        data.slice_mut(s![start..end, ..]).assign(&model.predict(rows)?);
    }
    Ok(Chromagram {
        data,
        fps: s_log.fps,
        kind: ChromaKind::Deep,
    })
}

/// `n_bands × 12` folding matrix. A band contributes to the pitch class of its
/// nearest semitone; bands exactly between two semitones split evenly.
pub fn pitch_class_weights(center_freqs: &[f64]) -> Array2<f64> {
    let mut w = Array2::zeros((center_freqs.len(), 12));
    for (b, &f) in center_freqs.iter().enumerate() {
        let semis = 12.0 * (f / A4_HZ).log2();
        let below = semis.floor();
        let frac = semis - below;
        let pc = |s: f64| (9 + s as i64).rem_euclid(12) as usize;
        if (frac - 0.5).abs() < 1e-6 {
            w[[b, pc(below)]] += 0.5;
            w[[b, pc(below + 1.0)]] += 0.5;
        } else {
            w[[b, pc(semis.round())]] = 1.0;
        }
    }
    w
}

fn max_normalise(data: &mut Array2<f64>) {
    for mut row in data.rows_mut() {
        let max = row.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            row /= max;
        }
    }
}

fn require_linear(s: &QuarterToneSpectrogram) -> Result<()> {
    if s.is_log {
        return Err(Error::InvalidParameter("folded chroma needs the linear spectrogram S".into()));
    }
    if s.center_freqs.len() != s.n_bands() {
        return Err(Error::Dimension("spectrogram lacks band centre frequencies".into()));
    }
    Ok(())
}

/// Baseline chromagram: octave-folded `S`, max-normalised per frame.
pub fn fold_chroma(s: &QuarterToneSpectrogram) -> Result<Chromagram> {
    require_linear(s)?;
    let mut data = s.data.dot(&pitch_class_weights(&s.center_freqs));
    max_normalise(&mut data);
    Ok(Chromagram {
        data,
        fps: s.fps,
        kind: ChromaKind::Folded,
    })
}

/// Gaussian weight over log-frequency, 1 at `center_hz`.
pub fn log_gaussian_weight(freq: f64, center_hz: f64, sigma_octaves: f64) -> f64 {
    let octaves = (freq / center_hz).log2() / sigma_octaves;
    (-0.5 * octaves * octaves).exp()
}

/// Baseline chromagram with frequency weighting and `log(1 + x)` compression
/// applied to the bands before folding.
pub fn fold_chroma_weighted_log(s: &QuarterToneSpectrogram, center_hz: f64, sigma_octaves: f64) -> Result<Chromagram> {
    require_linear(s)?;
    if !(center_hz > 0.0 && sigma_octaves > 0.0) {
        return Err(Error::InvalidParameter("weighting centre and width must be positive".into()));
    }
    let weights: Vec<f64> = s
        .center_freqs
        .iter()
        .map(|&f| log_gaussian_weight(f, center_hz, sigma_octaves))
        .collect();
    let mut compressed = s.data.clone();
    for mut row in compressed.rows_mut() {
        for (v, w) in row.iter_mut().zip(&weights) {
            *v = (w * *v).ln_1p();
        }
    }
    let mut data = compressed.dot(&pitch_class_weights(&s.center_freqs));
    max_normalise(&mut data);
    Ok(Chromagram {
        data,
        fps: s.fps,
        kind: ChromaKind::Folded,
    })
}

/// Binary chord templates of the reference annotation.
pub fn ideal_chroma(ann: &ChordAnnotation, n_frames: usize) -> Chromagram {
    Chromagram {
        data: frame_targets(ann, n_frames, FPS),
        fps: FPS,
        kind: ChromaKind::Ideal,
    }
}

/// Frame count for a context span: `seconds * fps` rounded to the nearest odd
/// integer, at least 1.
pub fn context_frames_for(seconds: f64, fps: f64) -> usize {
    let frames = seconds * fps;
    let half = ((frames - 1.0) / 2.0).round().max(0.0);
    2 * half as usize + 1
}

/// Concatenates the frames around each row, zero-padded at the edges.
pub fn stack_for_classifier(data: ArrayView2<f64>, context_seconds: f64, fps: f64) -> FeatureMatrix {
    let frames = context_frames_for(context_seconds, fps);
    FeatureMatrix {
        data: stack_frames(data, frames / 2),
        context_seconds: frames as f64 / fps,
    }
}

/// Pitch classes holding the `k` largest values of a chroma row.
pub fn top_pitch_classes(row: ndarray::ArrayView1<f64>, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Per-frame energy share of each pitch class.
pub fn energy_share(chroma: &Chromagram) -> Array2<f64> {
    let mut out = chroma.data.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let total: f64 = row.sum();
        if total > 0.0 {
            row /= total;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::parse_lab;
    use crate::dsp::{QuarterToneFilterbank, N_BANDS};
    use crate::nn::Activation;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spectrogram(data: Array2<f64>, is_log: bool) -> QuarterToneSpectrogram {
        QuarterToneSpectrogram {
            data,
            fps: 10.0,
            is_log,
            center_freqs: QuarterToneFilterbank::default().center_freqs,
        }
    }

    /// Explicit per-band loop over the same folding rule, written against
    /// pitch names rather than the weight matrix.
    fn brute_fold(s: &QuarterToneSpectrogram, band_value: impl Fn(usize, f64) -> f64) -> Array2<f64> {
        let mut out = Array2::<f64>::zeros((s.n_frames(), 12));
        for t in 0..s.n_frames() {
            for (b, &f) in s.center_freqs.iter().enumerate() {
                let quarter_tones = (24.0 * (f / 440.0).log2()).round() as i64;
                let v = band_value(b, s.data[[t, b]]);
                if quarter_tones % 2 == 0 {
                    out[[t, (9 + quarter_tones / 2).rem_euclid(12) as usize]] += v;
                } else {
                    let lower = (quarter_tones - 1) / 2;
                    out[[t, (9 + lower).rem_euclid(12) as usize]] += v / 2.0;
                    out[[t, (10 + lower).rem_euclid(12) as usize]] += v / 2.0;
                }
            }
            let m = (0..12).map(|p| out[[t, p]]).fold(0.0, f64::max);
            if m > 0.0 {
                for p in 0..12 {
                    out[[t, p]] /= m;
                }
            }
        }
        out
    }

    fn random_spectrogram(seed: u64, frames: usize) -> QuarterToneSpectrogram {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Array2::from_shape_simple_fn((frames, N_BANDS), || {
            if rng.gen_bool(0.3) {
                0.0
            } else {
                rng.gen_range(0.0..500.0)
            }
        });
        spectrogram(data, false)
    }

    #[test]
    fn a440_band_folds_to_a() {
        let fb = QuarterToneFilterbank::default();
        let w = pitch_class_weights(&fb.center_freqs);
        let band = fb.center_freqs.iter().position(|&f| f == 440.0).unwrap();
        assert_eq!(w.row(band).to_vec(), (0..12).map(|p| (p == 9) as u8 as f64).collect::<Vec<_>>());
        for row in w.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_frames_stay_zero() {
        let s = spectrogram(Array2::zeros((3, N_BANDS)), false);
        assert!(fold_chroma(&s).unwrap().data.iter().all(|&v| v == 0.0));
        assert!(fold_chroma_weighted_log(&s, 220.0, 1.0).unwrap().data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn triad_bands_fold_onto_triad() {
        let fb = QuarterToneFilterbank::default();
        let w = pitch_class_weights(&fb.center_freqs);
        let mut data = Array2::zeros((1, N_BANDS));
        for b in 0..N_BANDS {
            let pcs: Vec<usize> = (0..12).filter(|&p| w[[b, p]] > 0.0).collect();
            if pcs.len() == 1 && [0, 4, 7].contains(&pcs[0]) {
                data[[0, b]] = 1.0 + b as f64;
            }
        }
        let c = fold_chroma(&spectrogram(data, false)).unwrap();
        let nz: Vec<usize> = (0..12).filter(|&p| c.data[[0, p]] > 0.0).collect();
        assert_eq!(nz, vec![0, 4, 7]);
        assert_eq!(c.data.iter().copied().fold(0.0, f64::max), 1.0);
    }

    #[test]
    fn gaussian_weighting() {
        assert_eq!(log_gaussian_weight(220.0, 220.0, 1.0), 1.0);
        assert!((log_gaussian_weight(440.0, 220.0, 1.0) - (-0.5f64).exp()).abs() < 1e-15);
        assert!((log_gaussian_weight(110.0, 220.0, 1.0) - 0.6065306597126334).abs() < 1e-15);
    }

    #[test]
    fn folding_requires_linear_input() {
        let s = spectrogram(Array2::zeros((1, N_BANDS)), true);
        assert!(fold_chroma(&s).is_err());
        assert!(fold_chroma_weighted_log(&s, 220.0, 1.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn folds_match_brute_force(seed in any::<u64>()) {
            let s = random_spectrogram(seed, 4);
            let plain = fold_chroma(&s).unwrap();
            let oracle = brute_fold(&s, |_, v| v);
            for (a, b) in plain.data.iter().zip(oracle.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let weighted = fold_chroma_weighted_log(&s, 220.0, 1.0).unwrap();
            let oracle = brute_fold(&s, |b, v| {
                let f = s.center_freqs[b];
                let w = (-0.5 * ((f / 220.0).ln() / 2f64.ln()).powi(2)).exp();
                (1.0 + w * v).ln()
            });
            for (a, b) in weighted.data.iter().zip(oracle.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ideal_chroma_matches_templates() {
        let ann = parse_lab("0 1 C:maj\n1 2 N\n2 3 A:min7").unwrap();
        let c = ideal_chroma(&ann, 30);
        assert_eq!(c.data.row(3).to_vec(), vec![1., 0., 0., 0., 1., 0., 0., 1., 0., 0., 0., 0.]);
        assert!(c.data.row(15).iter().all(|&v| v == 0.0));
        assert_eq!(c.data, frame_targets(&ann, 30, 10.0));
    }

    #[test]
    fn classifier_context_sizes() {
        assert_eq!(context_frames_for(1.5, 10.0), 15);
        assert_eq!(context_frames_for(1.1, 10.0), 11);
        assert_eq!(context_frames_for(0.1, 10.0), 1);
        assert_eq!(context_frames_for(0.0, 10.0), 1);
        assert_eq!(context_frames_for(2.7, 10.0), 27);
        assert_eq!(context_frames_for(3.1, 10.0), 31);
        let chroma = Array2::from_shape_fn((20, 12), |(t, p)| (t * 12 + p) as f64);
        assert_eq!(stack_for_classifier(chroma.view(), 1.5, 10.0).dim(), 180);
        let slog = Array2::<f64>::zeros((5, N_BANDS));
        assert_eq!(stack_for_classifier(slog.view(), 1.1, 10.0).dim(), 1958);
        let single = stack_for_classifier(chroma.view(), 0.1, 10.0);
        assert_eq!(single.data, chroma);
        assert!((single.context_seconds - 0.1).abs() < 1e-12);
    }

    #[test]
    fn deep_chroma_range_and_locality() {
        let model = Mlp::new(&[15 * N_BANDS, 16, 12], Activation::Relu, Activation::Sigmoid, 3)
            .unwrap()
            .with_context_frames(15);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = Array2::from_shape_simple_fn((40, N_BANDS), || rng.gen_range(0.0..5.0));
        let c = deep_chroma(&model, &spectrogram(data.clone(), true)).unwrap();
        assert_eq!(c.data.dim(), (40, 12));
        assert!(c.data.iter().all(|&v| v > 0.0 && v < 1.0));

        let mut perturbed = data;
        perturbed.row_mut(28).fill(100.0);
        let p = deep_chroma(&model, &spectrogram(perturbed, true)).unwrap();
        assert_eq!(p.data.row(20), c.data.row(20));
        assert_ne!(p.data.row(21), c.data.row(21));

        let zeros = deep_chroma(&model, &spectrogram(Array2::zeros((10, N_BANDS)), true)).unwrap();
        for row in zeros.data.rows() {
            assert_eq!(row, zeros.data.row(0));
        }
        assert!(deep_chroma(&model, &spectrogram(Array2::zeros((10, N_BANDS)), false)).is_err());
        let small = Mlp::new(&[N_BANDS, 12], Activation::Relu, Activation::Sigmoid, 3).unwrap();
        assert_eq!(deep_chroma(&small, &spectrogram(Array2::zeros((2, N_BANDS)), true)).unwrap().data.nrows(), 2);
        let wrong = Mlp::new(&[100, 12], Activation::Relu, Activation::Sigmoid, 3).unwrap();
        assert!(deep_chroma(&wrong, &spectrogram(Array2::zeros((2, N_BANDS)), true)).is_err());
    }

    #[test]
    fn deep_chroma_chunks_agree_with_one_pass() {
        let model = Mlp::new(&[3 * N_BANDS, 12], Activation::Relu, Activation::Sigmoid, 1)
            .unwrap()
            .with_context_frames(3);
        let data = Array2::from_shape_fn((INFER_CHUNK + 5, N_BANDS), |(t, b)| ((t + b) % 7) as f64);
        let c = deep_chroma(&model, &spectrogram(data.clone(), true)).unwrap();
        let direct = model.predict(stack_frames(data.view(), 1).view()).unwrap();
        assert_eq!(c.data, direct);
    }
}
