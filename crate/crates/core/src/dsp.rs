//! Audio front end: WAV input, STFT magnitudes, the quarter-tone filterbank,
//! log compression and super-frame stacking.

use std::f64::consts::PI;
use std::path::Path;

use ndarray::{s, Array2, ArrayView2, Axis};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::{Error, Result};

pub const SAMPLE_RATE: u32 = 44_100;
pub const FRAME_SIZE: usize = 8192;
pub const HOP_SIZE: usize = 4410;
pub const FMIN: f64 = 30.0;
pub const FMAX: f64 = 5500.0;
pub const BANDS_PER_OCTAVE: u32 = 24;
/// Band count of the default filterbank.
pub const N_BANDS: usize = 178;
/// Frames on each side of the centre frame in a super-frame.
pub const CONTEXT_SIDE: usize = 7;
pub const CONTEXT_FRAMES: usize = 2 * CONTEXT_SIDE + 1;
pub const SUPERFRAME_DIM: usize = CONTEXT_FRAMES * N_BANDS;

/// Reference pitch of the quarter-tone grid.
pub const A4_HZ: f64 = 440.0;

/// Zero crossings of the resampling kernel on each side.
const SINC_ZERO_CROSSINGS: usize = 32;
/// Narrowest triangle half-width, in STFT bins.
const MIN_HALF_WIDTH_BINS: f64 = 1.0;

/// Mono audio with samples nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Audio("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("audio sample {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Multiplies every sample by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|v| v * k).collect(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn resampled(&self, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Audio("sample rate must be positive".into()));
        }
        Ok(Self {
            samples: resample(&self.samples, self.sample_rate, sample_rate),
            sample_rate,
        })
    }
}

/// Reads a PCM WAV file, downmixes to mono and resamples to 44.1 kHz.
pub fn load_audio(path: &Path) -> Result<AudioClip> {
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Audio(format!("{}: {other}", path.display())),
    })?;
    let spec = reader.spec();
    if !(1..=2).contains(&spec.channels) {
        return Err(Error::UnsupportedEncoding(format!(
            "{} channels",
            spec.channels
        )));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()
        }
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>(),
        (format, bits) => {
            return Err(Error::UnsupportedEncoding(format!("{bits}-bit {format:?}")));
        }
    }
    .map_err(|e| Error::Audio(format!("{}: {e}", path.display())))?;

    let channels = spec.channels as usize;
    let mono: Vec<f64> = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    if mono.is_empty() {
        return Err(Error::Audio(format!("{} holds no samples", path.display())));
    }
    let clip = AudioClip::new(mono, spec.sample_rate)?;
    if clip.sample_rate == SAMPLE_RATE {
        Ok(clip)
    } else {
        clip.resampled(SAMPLE_RATE)
    }
}

/// Writes a clip as 16-bit mono PCM; samples are clipped to `[-1, 1]`.
pub fn write_wav_pcm16(path: &Path, clip: &AudioClip) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut bytes = std::io::Cursor::new(Vec::new());
    {
        let mut writer = hound::WavWriter::new(&mut bytes, spec)
            .map_err(|e| Error::Audio(e.to_string()))?;
        for &v in &clip.samples {
            let q = (v.clamp(-1.0, 1.0) * 32767.0).round() as i16;
            writer
                .write_sample(q)
                .map_err(|e| Error::Audio(e.to_string()))?;
        }
        writer.finalize().map_err(|e| Error::Audio(e.to_string()))?;
    }
    crate::formats::write_atomic(path, &bytes.into_inner())
}

/// Band-limited resampling with a Blackman-windowed sinc kernel.
pub fn resample(samples: &[f64], from: u32, to: u32) -> Vec<f64> {
    if from == to || samples.is_empty() {
        return samples.to_vec();
    }
    let ratio = to as f64 / from as f64;
    let out_len = (samples.len() as f64 * ratio).round() as usize;
    let cutoff = ratio.min(1.0);
    let half_width = SINC_ZERO_CROSSINGS as f64 / cutoff;
    let last = samples.len() as isize - 1;
    (0..out_len)
        .map(|i| {
            let t = i as f64 / ratio;
            let lo = ((t - half_width).ceil() as isize).max(0);
            let hi = ((t + half_width).floor() as isize).min(last);
            (lo..=hi)
                .map(|j| {
                    let d = t - j as f64;
                    samples[j as usize] * cutoff * sinc(cutoff * d) * blackman(d / half_width)
                })
                .sum()
        })
        .collect()
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Blackman window on `[-1, 1]`.
fn blackman(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        0.42 + 0.5 * (PI * u).cos() + 0.08 * (2.0 * PI * u).cos()
    }
}

/// Symmetric Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeSpectrogram {
    /// `n_frames × (frame_size / 2 + 1)`.
    pub data: Array2<f64>,
    pub frame_size: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl MagnitudeSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.data.ncols()
    }
}

/// Hann-windowed STFT magnitudes. Frame `n` is centred on sample `n * hop`,
/// with zeros outside the clip.
pub fn stft_magnitude(clip: &AudioClip, frame_size: usize, hop: usize) -> Result<MagnitudeSpectrogram> {
    if clip.is_empty() {
        return Err(Error::Audio("empty clip".into()));
    }
    if frame_size == 0 || hop == 0 {
        return Err(Error::InvalidParameter("frame size and hop must be positive".into()));
    }
    let n_frames = clip.len().div_ceil(hop);
    let n_bins = frame_size / 2 + 1;
    let window = hann(frame_size);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(frame_size);
    let mut scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex::default(); frame_size];
    let mut data = Array2::zeros((n_frames, n_bins));
    let half = (frame_size / 2) as isize;
    let samples = clip.samples();
    for (n, mut row) in data.axis_iter_mut(Axis(0)).enumerate() {
        let start = (n * hop) as isize - half;
        for (i, (b, w)) in buf.iter_mut().zip(&window).enumerate() {
            let idx = start + i as isize;
            let x = if idx >= 0 && (idx as usize) < samples.len() {
                samples[idx as usize]
            } else {
                0.0
            };
            *b = Complex::new(x * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (out, c) in row.iter_mut().zip(&buf[..n_bins]) {
            *out = c.norm();
        }
    }
    Ok(MagnitudeSpectrogram {
        data,
        frame_size,
        hop,
        sample_rate: clip.sample_rate,
    })
}

/// Triangular filters on a quarter-tone grid anchored at A4.
#[derive(Debug, Clone, PartialEq)]
pub struct QuarterToneFilterbank {
    /// `n_bands × n_bins`, rows sum to one.
    pub matrix: Array2<f64>,
    pub center_freqs: Vec<f64>,
    pub sample_rate: u32,
    pub frame_size: usize,
}

impl QuarterToneFilterbank {
    pub fn n_bands(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.matrix.ncols()
    }
}

impl Default for QuarterToneFilterbank {
    fn default() -> Self {
        build_filterbank(SAMPLE_RATE, FRAME_SIZE, FMIN, FMAX, BANDS_PER_OCTAVE)
            .expect("default filterbank parameters are valid")
    }
}

/// Builds the triangular log-frequency filterbank.
///
/// Grid points `440 * 2^(k / bands_per_octave)` inside `[fmin, fmax]` are
/// enumerated; every interior point becomes a band whose triangle rises from
/// the previous grid point and falls to the next. Triangles narrower than one
/// STFT bin on a side are widened to one bin so each band touches at least one
/// bin. Rows with identical weights are merged and every row is normalised to
/// unit sum.
pub fn build_filterbank(
    sample_rate: u32,
    frame_size: usize,
    fmin: f64,
    fmax: f64,
    bands_per_octave: u32,
) -> Result<QuarterToneFilterbank> {
    let nyquist = sample_rate as f64 / 2.0;
    if !(fmin > 0.0 && fmin < fmax && fmax <= nyquist) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < fmin < fmax <= {nyquist} Hz, got {fmin}..{fmax}"
        )));
    }
    if frame_size < 2 || bands_per_octave == 0 {
        return Err(Error::InvalidParameter("degenerate frame size or resolution".into()));
    }
    let bpo = bands_per_octave as f64;
    let k_lo = (bpo * (fmin / A4_HZ).log2()).ceil() as i64;
    let k_hi = (bpo * (fmax / A4_HZ).log2()).floor() as i64;
    let grid: Vec<f64> = (k_lo..=k_hi)
        .map(|k| A4_HZ * 2f64.powf(k as f64 / bpo))
        .collect();
    if grid.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "no filters fit between {fmin} and {fmax} Hz"
        )));
    }

    let n_bins = frame_size / 2 + 1;
    let bin_hz = sample_rate as f64 / frame_size as f64;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(grid.len() - 2);
    let mut centers = Vec::with_capacity(grid.len() - 2);
    for w in grid.windows(3) {
        let (left, center, right) = (w[0] / bin_hz, w[1] / bin_hz, w[2] / bin_hz);
        let rise = (center - left).max(MIN_HALF_WIDTH_BINS);
        let fall = (right - center).max(MIN_HALF_WIDTH_BINS);
        let first = (center - rise).floor().max(0.0) as usize;
        let last = ((center + fall).ceil() as usize).min(n_bins - 1);
        let mut row = vec![0.0; n_bins];
        for (j, slot) in row.iter_mut().enumerate().take(last + 1).skip(first) {
            let x = j as f64;
            let v = if x <= center {
                1.0 - (center - x) / rise
            } else {
                1.0 - (x - center) / fall
            };
            *slot = v.max(0.0);
        }
        let total: f64 = row.iter().sum();
        if total <= 0.0 {
            continue;
        }
        row.iter_mut().for_each(|v| *v /= total);
        if rows.last() == Some(&row) {
            continue;
        }
        rows.push(row);
        centers.push(w[1]);
    }
    if rows.is_empty() {
        return Err(Error::InvalidParameter("no filter touches an STFT bin".into()));
    }
    let n_bands = rows.len();
    let matrix = Array2::from_shape_vec((n_bands, n_bins), rows.concat())
        .expect("rows have n_bins entries");
    Ok(QuarterToneFilterbank {
        matrix,
        center_freqs: centers,
        sample_rate,
        frame_size,
    })
}

/// Frames × bands magnitudes on the quarter-tone grid (`S`, or `S_Log` when
/// `is_log`).
#[derive(Debug, Clone, PartialEq)]
pub struct QuarterToneSpectrogram {
    pub data: Array2<f64>,
    pub fps: f64,
    pub is_log: bool,
    pub center_freqs: Vec<f64>,
}

impl QuarterToneSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_bands(&self) -> usize {
        self.data.ncols()
    }
}

pub fn apply_filterbank(spec: &MagnitudeSpectrogram, fb: &QuarterToneFilterbank) -> Result<QuarterToneSpectrogram> {
    if spec.n_bins() != fb.n_bins() {
        return Err(Error::Dimension(format!(
            "spectrogram has {} bins, filterbank expects {}",
            spec.n_bins(),
            fb.n_bins()
        )));
    }
    Ok(QuarterToneSpectrogram {
        data: spec.data.dot(&fb.matrix.t()),
        fps: spec.sample_rate as f64 / spec.hop as f64,
        is_log: false,
        center_freqs: fb.center_freqs.clone(),
    })
}

/// `log(1 + S)`, element-wise.
pub fn log_compress(s: &QuarterToneSpectrogram) -> Result<QuarterToneSpectrogram> {
    if s.is_log {
        return Err(Error::InvalidParameter("spectrogram is already log-compressed".into()));
    }
    if s.data.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidParameter("spectrogram holds negative or non-finite values".into()));
    }
    Ok(QuarterToneSpectrogram {
        data: s.data.mapv(f64::ln_1p),
        is_log: true,
        ..s.clone()
    })
}

/// One flattened context window per spectrogram frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperFrameSequence {
    /// `n_frames × (context_frames * n_bands)`.
    pub data: Array2<f64>,
    pub context_frames: usize,
}

pub fn stack_context(s_log: &QuarterToneSpectrogram, frames_per_side: usize) -> Result<SuperFrameSequence> {
    if !s_log.is_log {
        return Err(Error::InvalidParameter("super-frames are built from S_Log".into()));
    }
    Ok(SuperFrameSequence {
        data: stack_frames(s_log.data.view(), frames_per_side),
        context_frames: 2 * frames_per_side + 1,
    })
}

/// Concatenates frames `t - side ..= t + side` for every `t`, zero-padding
/// outside the matrix.
pub fn stack_frames(m: ArrayView2<f64>, side: usize) -> Array2<f64> {
    let (n, d) = m.dim();
    let width = 2 * side + 1;
    let mut out = Array2::zeros((n, width * d));
    for t in 0..n {
        for slot in 0..width {
            let src = t as isize + slot as isize - side as isize;
            if src < 0 || src >= n as isize {
                continue;
            }
            out.slice_mut(s![t, slot * d..(slot + 1) * d])
                .assign(&m.row(src as usize));
        }
    }
    out
}

/// The full audio → `S` front end with fixed STFT and filterbank parameters.
#[derive(Debug, Clone)]
pub struct Frontend {
    pub filterbank: QuarterToneFilterbank,
    pub frame_size: usize,
    pub hop: usize,
}

impl Default for Frontend {
    fn default() -> Self {
        Self {
            filterbank: QuarterToneFilterbank::default(),
            frame_size: FRAME_SIZE,
            hop: HOP_SIZE,
        }
    }
}

impl Frontend {
    /// Linear quarter-tone spectrogram `S`.
    pub fn spectrogram(&self, clip: &AudioClip) -> Result<QuarterToneSpectrogram> {
        if clip.sample_rate() != self.filterbank.sample_rate {
            return Err(Error::Audio(format!(
                "clip is at {} Hz, front end expects {} Hz",
                clip.sample_rate(),
                self.filterbank.sample_rate
            )));
        }
        let mag = stft_magnitude(clip, self.frame_size, self.hop)?;
        apply_filterbank(&mag, &self.filterbank)
    }

    /// Logarithmic quarter-tone spectrogram `S_Log`.
    pub fn log_spectrogram(&self, clip: &AudioClip) -> Result<QuarterToneSpectrogram> {
        log_compress(&self.spectrogram(clip)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, seconds: f64, sr: u32) -> AudioClip {
        let n = (seconds * sr as f64).round() as usize;
        let samples = (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / sr as f64).sin())
            .collect();
        AudioClip::new(samples, sr).unwrap()
    }

    /// Direct O(N²) DFT magnitude, independent of rustfft.
    fn dft_magnitudes(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, v) in x.iter().enumerate() {
                    let ang = -2.0 * PI * (k * i % n) as f64 / n as f64;
                    re += v * ang.cos();
                    im += v * ang.sin();
                }
                re.hypot(im)
            })
            .collect()
    }

    fn argmax(v: impl IntoIterator<Item = f64>) -> usize {
        v.into_iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, x)| if x > best.1 { (i, x) } else { best })
            .0
    }

    #[test]
    fn clip_validation() {
        assert!(AudioClip::new(vec![0.0], 0).is_err());
        assert!(AudioClip::new(vec![f64::NAN], 44100).is_err());
    }

    #[test]
    fn load_silence_and_antiphase_stereo() {
        let dir = tempfile::tempdir().unwrap();
        let silence = dir.path().join("silence.wav");
        write_wav_pcm16(&silence, &AudioClip::new(vec![0.0; 44100], 44100).unwrap()).unwrap();
        let clip = load_audio(&silence).unwrap();
        assert_eq!(clip.len(), 44100);
        assert!(clip.samples().iter().all(|&v| v == 0.0));

        let stereo = dir.path().join("stereo.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 44100,
            bits_per_sample: 24,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&stereo, spec).unwrap();
        for i in 0..1000 {
            let v = ((i as f64 * 0.05).sin() * 4_000_000.0) as i32;
            w.write_sample(v).unwrap();
            w.write_sample(-v).unwrap();
        }
        w.finalize().unwrap();
        let clip = load_audio(&stereo).unwrap();
        assert_eq!(clip.len(), 1000);
        assert!(clip.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn load_float_and_reject_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 44100,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        w.write_sample(0.25f32).unwrap();
        w.write_sample(-0.5f32).unwrap();
        w.finalize().unwrap();
        assert_eq!(load_audio(&p).unwrap().samples(), &[0.25, -0.5]);

        let empty = dir.path().join("empty.wav");
        hound::WavWriter::create(&empty, spec).unwrap().finalize().unwrap();
        assert!(load_audio(&empty).is_err());

        let junk = dir.path().join("junk.wav");
        std::fs::write(&junk, b"definitely not RIFF").unwrap();
        assert!(load_audio(&junk).is_err());
        assert!(matches!(load_audio(&dir.path().join("missing.wav")), Err(Error::Io { .. })));

        let eight = dir.path().join("eight.wav");
        let spec8 = hound::WavSpec { bits_per_sample: 8, sample_format: hound::SampleFormat::Int, ..spec };
        let mut w = hound::WavWriter::create(&eight, spec8).unwrap();
        w.write_sample(64i8).unwrap();
        w.finalize().unwrap();
        assert_eq!(load_audio(&eight).unwrap().samples(), &[0.5]);
    }

    #[test]
    fn resampled_sine_keeps_its_frequency() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("low.wav");
        write_wav_pcm16(&p, &sine(440.0, 1.0, 22050).scaled(0.5)).unwrap();
        let clip = load_audio(&p).unwrap();
        assert_eq!(clip.sample_rate(), 44100);
        assert_eq!(clip.len(), 44100);
        // one-second signal: DFT bin k is k Hz
        let peak = argmax(dft_magnitudes(clip.samples()));
        assert!((peak as i64 - 440).abs() <= 1, "peak at {peak} Hz");
    }

    #[test]
    fn downsampling_suppresses_content_above_nyquist() {
        let hi = sine(15_000.0, 0.5, 44100);
        let out = resample(hi.samples(), 44100, 22050);
        let interior = &out[2000..out.len() - 2000];
        let rms = (interior.iter().map(|v| v * v).sum::<f64>() / interior.len() as f64).sqrt();
        assert!(rms < 0.01, "rms {rms}");
    }

    #[test]
    fn stft_of_silence_and_frame_count() {
        let clip = AudioClip::new(vec![0.0; 44100], 44100).unwrap();
        let spec = stft_magnitude(&clip, FRAME_SIZE, HOP_SIZE).unwrap();
        assert_eq!(spec.data.dim(), (10, 4097));
        assert!(spec.data.iter().all(|&v| v == 0.0));
        let clip = AudioClip::new(vec![0.0; 44101], 44100).unwrap();
        assert_eq!(stft_magnitude(&clip, FRAME_SIZE, HOP_SIZE).unwrap().n_frames(), 11);
    }

    #[test]
    fn stft_peak_matches_direct_dft() {
        let clip = sine(440.0, 1.0, 44100);
        let spec = stft_magnitude(&clip, FRAME_SIZE, HOP_SIZE).unwrap();
        let expected = (440.0f64 * 8192.0 / 44100.0).round() as usize;
        assert_eq!(expected, 82);
        for row in spec.data.rows() {
            assert_eq!(argmax(row.iter().copied()), expected);
        }
        // frame 5 is centred on sample 22050
        let window = hann(FRAME_SIZE);
        let frame: Vec<f64> = (0..FRAME_SIZE)
            .map(|i| clip.samples()[22050 - 4096 + i] * window[i])
            .collect();
        let oracle = dft_magnitudes(&frame);
        for k in [0, 40, 81, 82, 83, 500] {
            let got = spec.data[[5, k]];
            assert!((got - oracle[k]).abs() <= 1e-6 * oracle[k].max(1.0), "bin {k}");
        }
    }

    #[test]
    fn stft_is_positively_homogeneous() {
        let clip = sine(300.0, 0.3, 44100);
        let a = stft_magnitude(&clip, 1024, 441).unwrap();
        let b = stft_magnitude(&clip.scaled(2.5), 1024, 441).unwrap();
        for (x, y) in a.data.iter().zip(b.data.iter()) {
            assert!((2.5 * x - y).abs() <= 1e-9 * y.max(1.0));
        }
    }

    #[test]
    fn default_filterbank_shape() {
        let fb = QuarterToneFilterbank::default();
        assert_eq!(fb.n_bands(), N_BANDS);
        assert_eq!(fb.n_bins(), 4097);
        assert!(fb.center_freqs.contains(&440.0));
        assert!(fb.center_freqs.windows(2).all(|w| w[0] < w[1]));
        assert!(fb.center_freqs.iter().all(|&f| (30.0..=5500.0).contains(&f)));
        for row in fb.matrix.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&v| v >= 0.0));
            let nz: Vec<usize> = (0..row.len()).filter(|&j| row[j] > 0.0).collect();
            assert!(!nz.is_empty());
            // contiguous support with a single peak
            assert_eq!(nz.last().unwrap() - nz[0] + 1, nz.len());
            let peak = argmax(row.iter().copied());
            assert!(nz[0..].windows(2).all(|w| {
                let (a, b) = (row[w[0]], row[w[1]]);
                if w[1] <= peak { a <= b } else { a >= b }
            }));
        }
        for i in 0..fb.n_bands() {
            for j in i + 1..fb.n_bands() {
                assert_ne!(fb.matrix.row(i), fb.matrix.row(j));
            }
        }
    }

    #[test]
    fn filterbank_rejects_degenerate_parameters() {
        assert!(build_filterbank(44100, 8192, 5500.0, 30.0, 24).is_err());
        assert!(build_filterbank(44100, 8192, 30.0, 30000.0, 24).is_err());
        assert!(build_filterbank(44100, 8192, 440.0, 445.0, 24).is_err());
    }

    #[test]
    fn grid_sines_land_in_their_band() {
        let fe = Frontend::default();
        let fb = &fe.filterbank;
        for (band, &f) in fb.center_freqs.iter().enumerate() {
            if !(100.0..=3000.0).contains(&f) {
                continue;
            }
            let s = fe.spectrogram(&sine(f, 0.5, 44100)).unwrap();
            // interior frames only; the edges see half a window of zeros
            for t in 1..s.n_frames() - 1 {
                assert_eq!(argmax(s.data.row(t).iter().copied()), band, "{f} Hz frame {t}");
            }
        }
    }

    #[test]
    fn filterbank_application_is_a_matrix_product() {
        let fb = QuarterToneFilterbank::default();
        let band = 100;
        let row = fb.matrix.row(band).to_owned();
        let spec = MagnitudeSpectrogram {
            data: row.clone().insert_axis(Axis(0)),
            frame_size: FRAME_SIZE,
            hop: HOP_SIZE,
            sample_rate: SAMPLE_RATE,
        };
        let out = apply_filterbank(&spec, &fb).unwrap();
        assert_eq!(out.fps, 10.0);
        assert!(!out.is_log);
        let squared: f64 = row.iter().map(|v| v * v).sum();
        assert!((out.data[[0, band]] - squared).abs() < 1e-15);
        assert_eq!(argmax(out.data.row(0).iter().copied()), band);

        let zeros = MagnitudeSpectrogram { data: Array2::zeros((3, 4097)), ..spec.clone() };
        assert!(apply_filterbank(&zeros, &fb).unwrap().data.iter().all(|&v| v == 0.0));
        let doubled = MagnitudeSpectrogram { data: &spec.data * 2.0, ..spec.clone() };
        let d = apply_filterbank(&doubled, &fb).unwrap();
        assert!(d.data.iter().zip(out.data.iter()).all(|(a, b)| (a - 2.0 * b).abs() < 1e-15));
        let bad = MagnitudeSpectrogram { data: Array2::zeros((1, 10)), ..spec };
        assert!(matches!(apply_filterbank(&bad, &fb), Err(Error::Dimension(_))));
    }

    fn qts(data: Array2<f64>, is_log: bool) -> QuarterToneSpectrogram {
        QuarterToneSpectrogram { data, fps: 10.0, is_log, center_freqs: vec![] }
    }

    #[test]
    fn log_compression() {
        let s = qts(ndarray::array![[0.0, std::f64::consts::E - 1.0, 3.0]], false);
        let l = log_compress(&s).unwrap();
        assert!(l.is_log);
        assert_eq!(l.data[[0, 0]], 0.0);
        assert!((l.data[[0, 1]] - 1.0).abs() < 1e-15);
        assert!(l.data[[0, 2]] > l.data[[0, 1]]);
        assert!(log_compress(&l).is_err());
    }

    #[test]
    fn context_stacking() {
        let n = 20;
        let data = Array2::from_shape_fn((n, N_BANDS), |(t, b)| (t * 1000 + b) as f64 + 1.0);
        let sf = stack_context(&qts(data.clone(), true), CONTEXT_SIDE).unwrap();
        assert_eq!(sf.data.dim(), (n, SUPERFRAME_DIM));
        assert_eq!(SUPERFRAME_DIM, 2670);
        assert!(sf.data.slice(s![0, ..7 * N_BANDS]).iter().all(|&v| v == 0.0));
        assert!(sf.data.slice(s![0, 7 * N_BANDS..]).iter().all(|&v| v != 0.0));
        for t in 0..n {
            assert_eq!(sf.data.slice(s![t, 7 * N_BANDS..8 * N_BANDS]), data.row(t));
        }
        assert!(stack_context(&qts(data, false), CONTEXT_SIDE).is_err());

        let flat = Array2::from_shape_fn((n, N_BANDS), |(_, b)| b as f64);
        let sf = stack_context(&qts(flat, true), CONTEXT_SIDE).unwrap();
        for t in 8..n - 7 {
            assert_eq!(sf.data.row(t), sf.data.row(7));
        }
    }

    #[test]
    fn pipeline_is_deterministic() {
        let fe = Frontend::default();
        let clip = sine(523.25, 0.7, 44100);
        let a = fe.log_spectrogram(&clip).unwrap();
        let b = fe.log_spectrogram(&clip).unwrap();
        assert_eq!(a, b);
        assert!(a.data.iter().all(|&v| v >= 0.0));
    }
}
