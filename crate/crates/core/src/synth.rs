//! Deterministic synthetic chord corpus: additive-sine chords with overtones,
//! per-song detuning and broadband noise bursts.

use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::annotations::{ChordAnnotation, ChordSegment, ChordSymbol, Quality};
use crate::corpus::{Manifest, ManifestEntry, MANIFEST_NAME};
use crate::dsp::{write_wav_pcm16, AudioClip, A4_HZ, SAMPLE_RATE};
use crate::formats::write_atomic;
use crate::{Error, Result};

/// Relative draw weights of the chord vocabulary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vocabulary {
    pub maj: f64,
    pub min: f64,
    pub min7: f64,
    pub dom7: f64,
    pub no_chord: f64,
}

impl Vocabulary {
    /// Triads and no-chord only.
    pub fn majmin() -> Self {
        Self {
            maj: 1.0,
            min: 1.0,
            min7: 0.0,
            dom7: 0.0,
            no_chord: 0.1,
        }
    }

    fn weights(&self) -> [f64; 5] {
        [self.maj, self.min, self.min7, self.dom7, self.no_chord]
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self {
            maj: 1.0,
            min: 1.0,
            min7: 0.25,
            dom7: 0.25,
            no_chord: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_songs: usize,
    pub song_seconds: f64,
    /// Chord durations are drawn uniformly from this range.
    pub chord_seconds: (f64, f64),
    pub vocabulary: Vocabulary,
    /// Partials per note, fundamental included.
    pub overtones: usize,
    /// Amplitude ratio between consecutive partials.
    pub overtone_decay: f64,
    /// Mean noise bursts per second.
    pub noise_rate: f64,
    /// Peak burst amplitude relative to a single note.
    pub noise_amplitude: f64,
    /// Decay time constant of a burst.
    pub noise_decay_s: f64,
    /// Gain of the melody voice relative to a chord note; 0 disables it.
    pub melody_amplitude: f64,
    /// Melody note durations are drawn uniformly from this range.
    pub melody_seconds: (f64, f64),
    /// Probability that a melody slot is a rest.
    pub melody_rest: f64,
    /// Probability that a chord is played as an arpeggio, one note at a
    /// time in rising order, instead of as a block chord.
    pub arpeggio_prob: f64,
    /// Arpeggio note durations are drawn per chord from this range.
    pub arpeggio_seconds: (f64, f64),
    /// Per-song tuning offset drawn from `±detune_cents`.
    pub detune_cents: f64,
    /// Lowest octave a chord voicing may start in (C4 is octave 4).
    pub min_octave: i32,
    pub max_octave: i32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            n_songs: 20,
            song_seconds: 30.0,
            chord_seconds: (1.0, 3.0),
            vocabulary: Vocabulary::default(),
            overtones: 6,
            overtone_decay: 0.5,
            noise_rate: 1.0,
            noise_amplitude: 1.0,
            noise_decay_s: 0.04,
            melody_amplitude: 1.0,
            melody_seconds: (0.15, 0.4),
            melody_rest: 0.3,
            arpeggio_prob: 0.5,
            arpeggio_seconds: (0.15, 0.3),
            detune_cents: 30.0,
            min_octave: 4,
            max_octave: 4,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        let (lo, hi) = self.chord_seconds;
        if !(self.song_seconds > 0.0 && self.song_seconds.is_finite()) {
            return bad(format!("song length {}", self.song_seconds));
        }
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad(format!("chord duration range {lo}..{hi}"));
        }
        let w = self.vocabulary.weights();
        if w.iter().any(|&x| !(x >= 0.0 && x.is_finite())) || w.iter().sum::<f64>() <= 0.0 {
            return bad("vocabulary weights must be non-negative with a positive sum".into());
        }
        if self.overtones == 0 || !(self.overtone_decay >= 0.0 && self.overtone_decay.is_finite()) {
            return bad("need at least one partial and a finite decay".into());
        }
        if !(self.noise_rate >= 0.0 && self.noise_amplitude >= 0.0 && self.detune_cents >= 0.0 && self.noise_decay_s > 0.0)
        {
            return bad("noise and detune settings must be non-negative".into());
        }
        let (mlo, mhi) = self.melody_seconds;
        if !(self.melody_amplitude >= 0.0 && mlo > 0.0 && mhi >= mlo && mhi.is_finite()) {
            return bad(format!("melody settings {} / {mlo}..{mhi}", self.melody_amplitude));
        }
        if !(0.0..=1.0).contains(&self.melody_rest) {
            return bad(format!("melody rest probability {}", self.melody_rest));
        }
        let (alo, ahi) = self.arpeggio_seconds;
        if !((0.0..=1.0).contains(&self.arpeggio_prob) && alo > 0.0 && ahi >= alo && ahi.is_finite()) {
            return bad(format!("arpeggio settings {} / {alo}..{ahi}", self.arpeggio_prob));
        }
        if self.min_octave < 1 || self.max_octave < self.min_octave || self.max_octave > 6 {
            return bad(format!("octave range {}..{}", self.min_octave, self.max_octave));
        }
        Ok(())
    }
}

/// Song identifier used for file names and manifests.
pub fn song_id(index: usize) -> String {
    format!("song{index:02}")
}

const ATTACK_S: f64 = 0.01;
const RELEASE_S: f64 = 0.03;
const PEAK: f64 = 0.9;
const NOTE_GAIN: f64 = 0.2;

/// Renders song `index`; the result depends only on `(config, index)`.
pub fn gen_song(config: &SynthConfig, index: usize) -> Result<(AudioClip, ChordAnnotation)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let sr = SAMPLE_RATE as f64;
    let n_samples = (config.song_seconds * sr).round() as usize;
    if n_samples == 0 {
        return Err(Error::InvalidParameter("song is shorter than one sample".into()));
    }
    let detune = if config.detune_cents > 0.0 {
        rng.gen_range(-config.detune_cents..=config.detune_cents)
    } else {
        0.0
    };
    let tuning = 2f64.powf(detune / 1200.0);

    let progression = draw_progression(config, &mut rng, n_samples);
    let mut audio = vec![0.0; n_samples];
    let mut segments = Vec::with_capacity(progression.len());
    for (start, end, symbol) in progression {
        render_chord(config, &mut rng, &symbol, tuning, &mut audio[start..end]);
        segments.push(ChordSegment {
            start: start as f64 / sr,
            end: end as f64 / sr,
            symbol,
        });
    }
    add_melody(config, &mut rng, tuning, &mut audio);
    add_noise(config, &mut rng, &mut audio);

    let peak = audio.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let k = PEAK / peak;
        audio.iter_mut().for_each(|v| *v *= k);
    }
    let clip = AudioClip::new(audio, SAMPLE_RATE)?;
    let ann = ChordAnnotation::new(song_id(index), segments)?;
    Ok((clip, ann))
}

/// Sample-quantised `(start, end, chord)` triples covering the song.
fn draw_progression(config: &SynthConfig, rng: &mut ChaCha8Rng, n_samples: usize) -> Vec<(usize, usize, ChordSymbol)> {
    let sr = SAMPLE_RATE as f64;
    let (lo, hi) = config.chord_seconds;
    let weights = config.vocabulary.weights();
    let total: f64 = weights.iter().sum();
    let mut out: Vec<(usize, usize, ChordSymbol)> = Vec::new();
    let mut start = 0usize;
    while start < n_samples {
        let len = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        let end = ((start as f64 + len * sr).round() as usize).min(n_samples).max(start + 1);
        let symbol = loop {
            let mut u = rng.gen_range(0.0..total);
            let mut kind = 0;
            while kind < 4 && u >= weights[kind] {
                u -= weights[kind];
                kind += 1;
            }
            let root = rng.gen_range(0..12u8);
            let s = match kind {
                0 => ChordSymbol::chord(root, Quality::Maj),
                1 => ChordSymbol::chord(root, Quality::Min),
                2 => ChordSymbol::chord(root, Quality::Min7),
                3 => ChordSymbol::chord(root, Quality::Dom7),
                _ => ChordSymbol::NoChord,
            };
            if out.last().map_or(true, |p| p.2 != s) {
                break s;
            }
        };
        out.push((start, end, symbol));
        start = end;
    }
    out
}

fn render_chord(config: &SynthConfig, rng: &mut ChaCha8Rng, symbol: &ChordSymbol, tuning: f64, out: &mut [f64]) {
    if symbol.root().is_none() {
        return;
    }
    let base_octave = rng.gen_range(config.min_octave..=config.max_octave);
    let n_octaves = rng.gen_range(2..=3);
    let mut notes: Vec<i32> = Vec::new();
    for pc in symbol.pitch_classes() {
        for o in 0..n_octaves {
            // midi note of `pc` in octave base_octave + o
            notes.push(12 * (base_octave + o + 1) + pc as i32);
        }
    }
    if config.arpeggio_prob > 0.0 && rng.gen_bool(config.arpeggio_prob) {
        notes.sort_unstable();
        let (lo, hi) = config.arpeggio_seconds;
        let step = (if hi > lo { rng.gen_range(lo..=hi) } else { lo } * SAMPLE_RATE as f64).round() as usize;
        let step = step.max(1);
        for (i, start) in (0..out.len()).step_by(step).enumerate() {
            let end = (start + step).min(out.len());
            let gain = NOTE_GAIN * rng.gen_range(0.6..1.0);
            render_note(config, rng, notes[i % notes.len()], gain, tuning, &mut out[start..end]);
        }
        return;
    }
    for midi in notes {
        let gain = NOTE_GAIN * rng.gen_range(0.6..1.0);
        render_note(config, rng, midi, gain, tuning, out);
    }
}

/// A monophonic line of short notes on random pitch classes in octave 5,
/// independent of the chords.
fn add_melody(config: &SynthConfig, rng: &mut ChaCha8Rng, tuning: f64, audio: &mut [f64]) {
    if config.melody_amplitude == 0.0 {
        return;
    }
    let sr = SAMPLE_RATE as f64;
    let (lo, hi) = config.melody_seconds;
    let mut start = 0usize;
    while start < audio.len() {
        let len = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        let end = ((start as f64 + len * sr).round() as usize).min(audio.len()).max(start + 1);
        if !rng.gen_bool(config.melody_rest) {
            let midi = 72 + rng.gen_range(0..12);
            let gain = NOTE_GAIN * config.melody_amplitude * rng.gen_range(0.7..1.0);
            render_note(config, rng, midi, gain, tuning, &mut audio[start..end]);
        }
        start = end;
    }
}

/// Adds one note with its overtones and a linear attack/release envelope.
fn render_note(config: &SynthConfig, rng: &mut ChaCha8Rng, midi: i32, gain: f64, tuning: f64, out: &mut [f64]) {
    let sr = SAMPLE_RATE as f64;
    let n = out.len();
    let attack = ((ATTACK_S * sr) as usize).min(n / 2).max(1);
    let release = ((RELEASE_S * sr) as usize).min(n / 2).max(1);
    let f0 = A4_HZ * 2f64.powf((midi - 69) as f64 / 12.0) * tuning;
    for k in 1..=config.overtones {
        let f = f0 * k as f64;
        let amp = gain * config.overtone_decay.powi(k as i32 - 1);
        let phase0 = rng.gen_range(0.0..TAU);
        if f >= 0.45 * sr || amp == 0.0 {
            continue;
        }
        let step = TAU * f / sr;
        for (i, v) in out.iter_mut().enumerate() {
            let env = if i < attack {
                i as f64 / attack as f64
            } else if n - i <= release {
                (n - i) as f64 / release as f64
            } else {
                1.0
            };
            *v += amp * env * (phase0 + step * i as f64).sin();
        }
    }
}

/// Exponentially decaying white-noise bursts at uniformly drawn onsets.
fn add_noise(config: &SynthConfig, rng: &mut ChaCha8Rng, audio: &mut [f64]) {
    if config.noise_rate == 0.0 || config.noise_amplitude == 0.0 {
        return;
    }
    let sr = SAMPLE_RATE as f64;
    let n = audio.len();
    let bursts = (config.noise_rate * n as f64 / sr).round() as usize;
    // bursts are cut after six time constants
    let len = (6.0 * config.noise_decay_s * sr) as usize;
    for _ in 0..bursts {
        let onset = rng.gen_range(0..n);
        let amp = NOTE_GAIN * config.noise_amplitude * rng.gen_range(0.5..1.0);
        for (i, v) in audio[onset..(onset + len).min(n)].iter_mut().enumerate() {
            let env = (-(i as f64) / (config.noise_decay_s * sr)).exp();
            *v += amp * env * rng.gen_range(-1.0..1.0);
        }
    }
}

/// Writes `songNN.wav`, `songNN.lab` and the manifest into `dir`.
pub fn gen_corpus(config: &SynthConfig, dir: &Path) -> Result<Manifest> {
    config.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let entries = (0..config.n_songs)
        .into_par_iter()
        .map(|i| {
            let (clip, ann) = gen_song(config, i)?;
            let id = song_id(i);
            let wav = format!("{id}.wav");
            let lab = format!("{id}.lab");
            write_wav_pcm16(&dir.join(&wav), &clip)?;
            write_atomic(&dir.join(&lab), ann.to_lab().as_bytes())?;
            Ok(ManifestEntry {
                id,
                wav: wav.into(),
                lab: lab.into(),
                duration: clip.duration(),
                group: "synth".into(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest { entries };
    manifest.write(&dir.join(MANIFEST_NAME))?;
    Ok(manifest)
}
