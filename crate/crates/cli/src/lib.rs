//! The `deepchroma` command line.
//!
//! [`run`] parses arguments, executes one subcommand and maps the outcome
//! to an exit code: 0 on success, 1 for usage errors, 2 for data or model
//! errors. Every output file is written atomically.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};
use ndarray::{Array2, ArrayView2, Axis};

use deepchroma::annotations::{frame_labels, frame_targets, parse_chord, parse_lab_with_id, reduce_majmin, ChordClass};
use deepchroma::classifier::{train_logreg, ClassifierConfig};
use deepchroma::corpus::{load_corpus, Song};
use deepchroma::dsp::{load_audio, stack_frames, Frontend, N_BANDS};
use deepchroma::eval::{
    base_features, cross_validate, make_folds, results_table, sweep_context, write_scores_csv, write_sweep_csv,
    ExperimentConfig, FeatureKind, FoldSplit,
};
use deepchroma::extractor::{train_extractor, ExtractorConfig};
use deepchroma::features::{context_frames_for, deep_chroma, stack_for_classifier};
use deepchroma::formats::{read_features, write_atomic, write_features, write_labels};
use deepchroma::nn::{load_model, save_model, Mlp};
use deepchroma::saliency::{average_by_chord, average_maps, sum_over_freq_signed, sum_over_time, SaliencyMap, Selector};
use deepchroma::synth::{gen_corpus, SynthConfig, Vocabulary};
use deepchroma::{render, report, FPS};

/// Frame rate stored in DCF1 files that hold saliency maps rather than a
/// time series; `render` uses it to pick the colour scheme.
pub const SALIENCY_FPS: f32 = 0.0;

#[derive(Debug, Parser)]
#[command(name = "deepchroma", version, about = "Deep chroma features for chord recognition")]
struct Cli {
    /// Flat `key = value` file supplying defaults for long options.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic annotated corpus.
    Synth(SynthArgs),
    /// Compute the log quarter-tone spectrogram of a WAV file.
    Spectrogram(SpectrogramArgs),
    /// Convert a .lab file into per-frame classes (and chord templates).
    Targets(TargetsArgs),
    /// Train a deep chroma extractor on one fold rotation.
    TrainExtractor(TrainExtractorArgs),
    /// Compute frame features of a WAV file.
    Extract(ExtractArgs),
    /// Train the logistic-regression chord classifier on one rotation.
    TrainClassifier(TrainClassifierArgs),
    /// Cross-validate a feature and write per-song scores.
    Evaluate(EvaluateArgs),
    /// Cross-validate a feature at several context lengths.
    SweepContext(SweepArgs),
    /// Guided-backpropagation saliency of an extractor.
    Saliency(SaliencyArgs),
    /// Render a DCF1 file as a PGM or PPM image.
    Render(RenderArgs),
    /// Summarise score files with paired t-tests.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    songs: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long)]
    song_seconds: Option<f64>,
    /// `full` adds seventh chords to major, minor and no-chord.
    #[arg(long, default_value = "full", value_parser = ["full", "majmin"])]
    vocab: String,
    #[arg(long)]
    overtones: Option<usize>,
    #[arg(long)]
    noise_rate: Option<f64>,
    #[arg(long)]
    noise_amplitude: Option<f64>,
    #[arg(long)]
    melody_amplitude: Option<f64>,
}

#[derive(Debug, Args)]
struct SpectrogramArgs {
    #[arg(long)]
    wav: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Write the linear spectrogram instead of its logarithm.
    #[arg(long)]
    linear: bool,
}

#[derive(Debug, Args)]
struct TargetsArgs {
    #[arg(long)]
    lab: PathBuf,
    /// DCL1 output with one class per frame.
    #[arg(long)]
    out: PathBuf,
    /// Frame count; defaults to the frames of `--wav` or the annotation span.
    #[arg(long, conflicts_with = "wav")]
    frames: Option<usize>,
    #[arg(long)]
    wav: Option<PathBuf>,
    /// Also write the 12-dimensional chord templates as DCF1.
    #[arg(long)]
    templates: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CorpusArgs {
    /// Corpus directory or manifest file.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 8)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args, Clone)]
struct TrainArgs {
    /// Extractor epoch limit.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Hidden layer sizes of the extractor.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    classifier_epochs: Option<usize>,
    #[arg(long)]
    classifier_patience: Option<usize>,
    #[arg(long)]
    l2: Option<f64>,
}

impl TrainArgs {
    fn extractor(&self, context_seconds: f64, seed: u64) -> ExtractorConfig {
        let mut cfg = ExtractorConfig {
            context_frames: context_frames_for(context_seconds, FPS),
            seed,
            ..ExtractorConfig::default()
        };
        let t = &mut cfg.train;
        set(&mut t.max_epochs, self.epochs);
        set(&mut t.batch_size, self.batch_size);
        set(&mut t.patience, self.patience);
        set(&mut t.adam.alpha, self.learning_rate);
        set(&mut t.dropout_p, self.dropout);
        set(&mut cfg.hidden, self.hidden.clone());
        cfg
    }

    fn classifier(&self) -> ClassifierConfig {
        let mut cfg = ClassifierConfig::default();
        set(&mut cfg.train.max_epochs, self.classifier_epochs);
        set(&mut cfg.train.patience, self.classifier_patience);
        set(&mut cfg.train.l2, self.l2);
        cfg
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[derive(Debug, Args)]
struct TrainExtractorArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Fold held out for testing; training and validation use the rest.
    #[arg(long, default_value_t = 0)]
    test_fold: usize,
    /// Total input context in seconds.
    #[arg(long, default_value_t = 1.5)]
    context: f64,
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long)]
    wav: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Trained extractor; implies `--feature deep`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// deep, c, cwlog or slog.
    #[arg(long)]
    feature: Option<FeatureKind>,
}

#[derive(Debug, Args)]
struct FeatureArgs {
    /// deep, c, cwlog, slog or ideal.
    #[arg(long, default_value = "deep")]
    feature: FeatureKind,
    /// Context in seconds; defaults to 1.5 for deep, 2.7 for c, 3.1 for
    /// cwlog, 1.1 for slog and 0.1 for ideal.
    #[arg(long)]
    context: Option<f64>,
}

impl FeatureArgs {
    fn context(&self) -> f64 {
        self.context.unwrap_or(match self.feature {
            FeatureKind::Deep => 1.5,
            FeatureKind::Chroma => 2.7,
            FeatureKind::WeightedLogChroma => 3.1,
            FeatureKind::LogSpectrogram => 1.1,
            FeatureKind::Ideal => 0.1,
        })
    }
}

#[derive(Debug, Args)]
struct TrainClassifierArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    feature: FeatureArgs,
    /// Trained extractor, required for deep chroma.
    #[arg(long)]
    extractor: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    test_fold: usize,
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    feature: FeatureArgs,
    #[command(flatten)]
    train: TrainArgs,
    /// Per-song scores CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, default_value = "deep")]
    feature: FeatureKind,
    /// Context lengths in seconds.
    #[arg(long, value_delimiter = ',', required = true)]
    contexts: Vec<f64>,
    #[command(flatten)]
    train: TrainArgs,
    /// CSV with one row per context.
    #[arg(long)]
    out: PathBuf,
    /// Also write the per-song test scores of every context.
    #[arg(long)]
    scores: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SaliencyArgs {
    /// Trained extractor.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    wav: PathBuf,
    /// Annotation, needed for `--by-chord`.
    #[arg(long)]
    lab: Option<PathBuf>,
    /// Only back-propagate from the pitch classes of this chord.
    #[arg(long, conflicts_with = "by_chord")]
    chord: Option<String>,
    /// One map per annotated chord class, seeded by its template.
    #[arg(long, requires = "lab")]
    by_chord: bool,
    /// Use a single frame instead of the average over all frames.
    #[arg(long, conflicts_with = "by_chord")]
    frame: Option<usize>,
    /// DCF1 output, one flattened map per row.
    #[arg(long)]
    out: PathBuf,
    /// CSV of the time-summed and frequency-summed profiles.
    #[arg(long)]
    profiles: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// DCF1 input.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// `auto` renders saliency files in colour and everything else in gray.
    #[arg(long, default_value = "auto", value_parser = ["auto", "gray", "saliency"])]
    kind: String,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Score CSVs written by `evaluate` or `sweep-context --scores`.
    #[arg(required = true)]
    scores: Vec<PathBuf>,
    /// Also write the report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Why a command failed; decides the exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(deepchroma::Error),
}

impl From<deepchroma::Error> for Failure {
    fn from(e: deepchroma::Error) -> Self {
        Failure::Data(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Runs the command line `argv` (program name first) and returns the exit
/// code. Results go to stdout, diagnostics to stderr.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let argv = match apply_config(argv) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 1;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

/// Appends `--key value` for every config entry not given on the command
/// line, so explicit flags win over the file and the file over defaults.
fn apply_config(mut argv: Vec<String>) -> std::result::Result<Vec<String>, String> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            path = Some(argv.get(i + 1).ok_or("--config needs a file")?.clone());
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{path}: {e}"))?;
    let entries = parse_config(&text).map_err(|e| format!("{path}: {e}"))?;

    let cmd = Cli::command();
    let sub = argv
        .iter()
        .skip(1)
        .find_map(|a| cmd.find_subcommand(a))
        .ok_or("--config needs a subcommand")?;
    for (key, value) in entries {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| format!("{path}: unknown option {key:?} for {}", sub.get_name()))?;
        let flag = format!("--{key}");
        if argv.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}="))) {
            continue;
        }
        if arg.get_action().takes_values() {
            argv.push(format!("{flag}={value}"));
        } else {
            match value.as_str() {
                "true" => argv.push(flag),
                "false" => {}
                v => return Err(format!("{path}: {key} is a switch, got {v:?}")),
            }
        }
    }
    Ok(argv)
}

/// `key = value` lines; blank lines and lines starting with `#` are skipped.
fn parse_config(text: &str) -> std::result::Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
        let (k, v) = (k.trim().replace('_', "-"), v.trim().to_string());
        if k.is_empty() || k == "config" {
            return Err(format!("line {}: bad key {k:?}", n + 1));
        }
        if out.iter().any(|(seen, _)| *seen == k) {
            return Err(format!("line {}: {k} set twice", n + 1));
        }
        out.push((k, v));
    }
    Ok(out)
}

fn execute(command: Command) -> Outcome {
    match command {
        Command::Synth(a) => synth(a),
        Command::Spectrogram(a) => spectrogram(a),
        Command::Targets(a) => targets(a),
        Command::TrainExtractor(a) => train_extractor_cmd(a),
        Command::Extract(a) => extract(a),
        Command::TrainClassifier(a) => train_classifier(a),
        Command::Evaluate(a) => evaluate(a),
        Command::SweepContext(a) => sweep(a),
        Command::Saliency(a) => saliency(a),
        Command::Render(a) => render_cmd(a),
        Command::Report(a) => report_cmd(a),
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn synth(a: SynthArgs) -> Outcome {
    let mut cfg = SynthConfig {
        seed: a.seed,
        n_songs: a.songs,
        ..SynthConfig::default()
    };
    if a.vocab == "majmin" {
        cfg.vocabulary = Vocabulary::majmin();
    }
    set(&mut cfg.song_seconds, a.song_seconds);
    set(&mut cfg.overtones, a.overtones);
    set(&mut cfg.noise_rate, a.noise_rate);
    set(&mut cfg.noise_amplitude, a.noise_amplitude);
    set(&mut cfg.melody_amplitude, a.melody_amplitude);
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let manifest = gen_corpus(&cfg, &a.out)?;
    println!("wrote {} songs to {}", manifest.entries.len(), a.out.display());
    Ok(())
}

fn spectrogram(a: SpectrogramArgs) -> Outcome {
    let clip = load_audio(&a.wav)?;
    let fe = Frontend::default();
    let s = if a.linear { fe.spectrogram(&clip)? } else { fe.log_spectrogram(&clip)? };
    write_features(&a.out, &s.data, FPS as f32)?;
    println!("{} frames x {} bands", s.n_frames(), s.n_bands());
    Ok(())
}

fn read_lab(path: &Path) -> deepchroma::Result<deepchroma::annotations::ChordAnnotation> {
    let text = std::fs::read_to_string(path).map_err(|e| deepchroma::Error::Data(format!("{}: {e}", path.display())))?;
    let id = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    parse_lab_with_id(&text, &id)
}

fn targets(a: TargetsArgs) -> Outcome {
    let ann = read_lab(&a.lab)?;
    let n = match (a.frames, &a.wav) {
        (Some(n), _) => n,
        (None, Some(wav)) => Frontend::default().spectrogram(&load_audio(wav)?)?.n_frames(),
        // frames whose centre lies before the end of the annotation
        (None, None) => (ann.end_time() * FPS - 1e-9).ceil().max(0.0) as usize,
    };
    let labels = frame_labels(&ann, n, FPS);
    if let Some(p) = &a.templates {
        write_features(p, &frame_targets(&ann, n, FPS), FPS as f32)?;
    }
    write_labels(&a.out, &labels)?;
    println!("{n} frames");
    Ok(())
}

struct Corpus {
    songs: Vec<Song>,
    split: FoldSplit,
}

fn load(a: &CorpusArgs) -> std::result::Result<Corpus, Failure> {
    if a.folds < 2 {
        return Err(usage("--folds must be at least 2"));
    }
    let songs = load_corpus(&a.corpus, &Frontend::default())?;
    let groups: Vec<String> = songs.iter().map(|s| s.group.clone()).collect();
    let split = make_folds(songs.len(), Some(&groups), a.folds, a.seed)?;
    Ok(Corpus { songs, split })
}

fn pick<'a>(songs: &'a [Song], idx: &[usize]) -> Vec<&'a Song> {
    idx.iter().map(|&i| &songs[i]).collect()
}

fn check_fold(test_fold: usize, folds: usize) -> Outcome {
    if test_fold >= folds {
        return Err(usage(format!("--test-fold {test_fold} is out of range for {folds} folds")));
    }
    Ok(())
}

fn train_extractor_cmd(a: TrainExtractorArgs) -> Outcome {
    check_fold(a.test_fold, a.corpus.folds)?;
    let cfg = a.train.extractor(a.context, a.corpus.seed);
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let c = load(&a.corpus)?;
    let r = c.split.rotation(a.test_fold);
    let out = train_extractor(&pick(&c.songs, &r.train), &pick(&c.songs, &r.val), &cfg)?;
    save_model(&out.model, &a.out)?;
    let best = &out.history[out.best_epoch - 1];
    println!(
        "{} epochs, best epoch {} with validation accuracy {:.4}",
        out.history.len(),
        out.best_epoch,
        best.val_metric
    );
    Ok(())
}

fn load_extractor(path: &Path) -> std::result::Result<Mlp, Failure> {
    let model = load_model(path)?;
    if model.input_dim() != model.context_frames as usize * N_BANDS || model.output_dim() != 12 {
        return Err(Failure::Data(deepchroma::Error::Format(format!(
            "{} is not a chroma extractor",
            path.display()
        ))));
    }
    Ok(model)
}

fn extract(a: ExtractArgs) -> Outcome {
    let kind = match (a.feature, &a.model) {
        (Some(k), _) => k,
        (None, Some(_)) => FeatureKind::Deep,
        (None, None) => return Err(usage("give --model for deep chroma or --feature")),
    };
    if kind == FeatureKind::Ideal {
        return Err(usage("ideal chroma comes from annotations; use `targets --templates`"));
    }
    if kind == FeatureKind::Deep && a.model.is_none() {
        return Err(usage("deep chroma needs --model"));
    }
    let clip = load_audio(&a.wav)?;
    let song = song_from_clip(&clip)?;
    let data = match kind {
        FeatureKind::Deep => deep_chroma(&load_extractor(a.model.as_deref().unwrap_or(Path::new("")))?, &song.s_log)?.data,
        k => base_features(&song, k, &ExperimentConfig::default())?,
    };
    write_features(&a.out, &data, FPS as f32)?;
    println!("{} frames x {} dims", data.nrows(), data.ncols());
    Ok(())
}

/// A song with an empty annotation, for feature computation only.
fn song_from_clip(clip: &deepchroma::dsp::AudioClip) -> deepchroma::Result<Song> {
    let s = Frontend::default().spectrogram(clip)?;
    Song::from_parts("input", "", parse_lab_with_id("", "input")?, s)
}

fn train_classifier(a: TrainClassifierArgs) -> Outcome {
    check_fold(a.test_fold, a.corpus.folds)?;
    let kind = a.feature.feature;
    let context = a.feature.context();
    let extractor = match (kind, &a.extractor) {
        (FeatureKind::Deep, Some(p)) => Some(load_extractor(p)?),
        (FeatureKind::Deep, None) => return Err(usage("deep chroma needs --extractor")),
        _ => None,
    };
    let c = load(&a.corpus)?;
    let exp = ExperimentConfig {
        feature: kind,
        context_seconds: context,
        ..ExperimentConfig::default()
    };
    let (feats, frames) = match &extractor {
        Some(m) => (
            c.songs
                .iter()
                .map(|s| deep_chroma(m, &s.s_log).map(|ch| ch.data))
                .collect::<deepchroma::Result<Vec<_>>>()?,
            1,
        ),
        None => (
            c.songs
                .iter()
                .map(|s| base_features(s, kind, &exp).map(|b| stack_for_classifier(b.view(), context, FPS).data))
                .collect::<deepchroma::Result<Vec<_>>>()?,
            context_frames_for(context, FPS),
        ),
    };
    let gather = |idx: &[usize]| -> deepchroma::Result<(Array2<f64>, Vec<ChordClass>)> {
        let views: Vec<_> = idx.iter().map(|&i| feats[i].view()).collect();
        let x = ndarray::concatenate(Axis(0), &views).map_err(|e| deepchroma::Error::Dimension(e.to_string()))?;
        Ok((x, idx.iter().flat_map(|&i| c.songs[i].labels()).collect()))
    };
    let r = c.split.rotation(a.test_fold);
    let (tx, ty) = gather(&r.train)?;
    let (vx, vy) = gather(&r.val)?;
    let mut ccfg = a.train.classifier();
    ccfg.train.seed = a.corpus.seed;
    let fit = train_logreg(tx.view(), &ty, vx.view(), &vy, frames as u32, &ccfg)?;
    fit.model.save(&a.out)?;
    println!(
        "{} epochs, best epoch {} with validation frame accuracy {:.4}",
        fit.history.len(),
        fit.best_epoch,
        fit.history[fit.best_epoch - 1].val_metric
    );
    Ok(())
}

fn experiment(kind: FeatureKind, context: f64, train: &TrainArgs, seed: u64) -> std::result::Result<ExperimentConfig, Failure> {
    let cfg = ExperimentConfig {
        feature: kind,
        context_seconds: context,
        extractor: train.extractor(context, seed),
        classifier: train.classifier(),
        seed,
        ..ExperimentConfig::default()
    };
    if !(context > 0.0 && context.is_finite()) {
        return Err(usage(format!("context {context} must be positive")));
    }
    cfg.extractor.validate().map_err(|e| usage(e.to_string()))?;
    cfg.classifier.train.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn evaluate(a: EvaluateArgs) -> Outcome {
    let cfg = experiment(a.feature.feature, a.feature.context(), &a.train, a.corpus.seed)?;
    let c = load(&a.corpus)?;
    let result = cross_validate(&c.songs, &c.split, &cfg)?;
    let results = [result];
    write_scores_csv(&a.out, &results)?;
    print!("{}", results_table(&results));
    Ok(())
}

fn sweep(a: SweepArgs) -> Outcome {
    for &ctx in &a.contexts {
        experiment(a.feature, ctx, &a.train, a.corpus.seed)?;
    }
    let cfg = experiment(a.feature, a.contexts[0], &a.train, a.corpus.seed)?;
    let c = load(&a.corpus)?;
    let results = sweep_context(&c.songs, &c.split, &cfg, &a.contexts)?;
    if let Some(p) = &a.scores {
        write_scores_csv(p, &results)?;
    }
    write_sweep_csv(&a.out, &results)?;
    print!("{}", results_table(&results));
    Ok(())
}

fn saliency(a: SaliencyArgs) -> Outcome {
    let selector = match &a.chord {
        Some(label) => {
            let class = reduce_majmin(&parse_chord(label).map_err(|e| usage(e.to_string()))?);
            if matches!(class, ChordClass::NoChord | ChordClass::Excluded) {
                return Err(usage(format!("{label} selects no pitch classes")));
            }
            Selector::template(class)
        }
        None => Selector::All,
    };
    let model = load_extractor(&a.model)?;
    let ctx = model.context_frames as usize;
    let s_log = Frontend::default().log_spectrogram(&load_audio(&a.wav)?)?;
    let x = stack_frames(s_log.data.view(), ctx / 2);

    let mut names = Vec::new();
    let mut maps = Vec::new();
    if a.by_chord {
        let ann = read_lab(a.lab.as_deref().unwrap_or(Path::new("")))?;
        let labels = frame_labels(&ann, x.nrows(), FPS);
        for (class, map) in average_by_chord(&model, x.view(), &labels)? {
            names.push(class.to_string());
            maps.push(map);
        }
    } else {
        let rows = match a.frame {
            Some(t) if t >= x.nrows() => {
                return Err(usage(format!("--frame {t} is beyond the {} frames of the input", x.nrows())));
            }
            Some(t) => x.slice(ndarray::s![t..t + 1, ..]),
            None => x.view(),
        };
        names.push(a.chord.clone().unwrap_or_else(|| "all".into()));
        maps.push(average_maps(&model, rows, &selector)?);
    }
    if maps.is_empty() {
        return Err(Failure::Data(deepchroma::Error::Data("no frames to explain".into())));
    }

    let flat: Vec<f64> = maps.iter().flat_map(|m| m.data.iter().copied()).collect();
    let data = Array2::from_shape_vec((maps.len(), ctx * N_BANDS), flat)
        .map_err(|e| deepchroma::Error::Dimension(e.to_string()))?;
    if let Some(p) = &a.profiles {
        write_atomic(p, profiles_csv(&names, &maps).as_bytes())?;
    }
    write_features(&a.out, &data, SALIENCY_FPS)?;
    for (i, n) in names.iter().enumerate() {
        println!("{i}\t{n}");
    }
    Ok(())
}

/// `map,axis,index,net,positive,negative`: band profiles summed over time,
/// then frame profiles summed over frequency.
fn profiles_csv(names: &[String], maps: &[SaliencyMap]) -> String {
    let mut out = String::from("map,axis,index,net,positive,negative\n");
    for (name, map) in names.iter().zip(maps) {
        let bands = sum_over_time(map);
        for (i, v) in bands.values.iter().enumerate() {
            let _ = writeln!(out, "{name},band,{i},{v},,");
        }
        let frames = sum_over_freq_signed(map);
        if let Some((pos, neg)) = &frames.split {
            for (i, v) in frames.values.iter().enumerate() {
                let _ = writeln!(out, "{name},frame,{i},{v},{},{}", pos[i], neg[i]);
            }
        }
    }
    out
}

fn render_cmd(a: RenderArgs) -> Outcome {
    let file = read_features(&a.input)?;
    let colour = match a.kind.as_str() {
        "saliency" => true,
        "gray" => false,
        _ => file.fps == SALIENCY_FPS,
    };
    let bytes = if colour {
        let dim = file.data.ncols();
        if dim % N_BANDS != 0 {
            return Err(Failure::Data(deepchroma::Error::Dimension(format!(
                "saliency rows have {dim} values, not a multiple of {N_BANDS} bands"
            ))));
        }
        let maps: Vec<ArrayView2<f64>> = file
            .data
            .rows()
            .into_iter()
            .map(|r| r.into_shape_with_order((dim / N_BANDS, N_BANDS)))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| deepchroma::Error::Dimension(e.to_string()))?;
        render::diverging_ppm(&maps)?
    } else {
        render::grayscale_pgm(file.data.view())?
    };
    write_atomic(&a.out, &bytes)?;
    Ok(())
}

fn report_cmd(a: ReportArgs) -> Outcome {
    let mut rows = Vec::new();
    for p in &a.scores {
        rows.extend(report::read_scores(p)?);
    }
    let sets = report::group_by_feature(rows)?;
    let text = report::report(&sets)?;
    if let Some(p) = &a.out {
        write_atomic(p, text.as_bytes())?;
    }
    print!("{text}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_lines() {
        let c = parse_config("# defaults\nseed = 3\n\nbatch_size=64\n").unwrap();
        assert_eq!(c, vec![("seed".into(), "3".into()), ("batch-size".into(), "64".into())]);
        assert!(parse_config("seed 3").is_err());
        assert!(parse_config("seed = 1\nseed = 2").is_err());
    }

    #[test]
    fn command_line_beats_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.txt");
        std::fs::write(&cfg, "seed = 3\nsongs = 4\n").unwrap();
        let argv: Vec<String> = ["deepchroma", "synth", "--out", "x", "--seed", "9", "--config"]
            .iter()
            .map(|s| s.to_string())
            .chain([cfg.display().to_string()])
            .collect();
        let out = apply_config(argv).unwrap();
        let cli = Cli::try_parse_from(&out).unwrap();
        let Command::Synth(a) = cli.command else { panic!() };
        assert_eq!((a.seed, a.songs), (9, 4));
    }

    #[test]
    fn unknown_config_key() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.txt");
        std::fs::write(&cfg, "colour = red\n").unwrap();
        let argv = vec!["deepchroma".to_string(), "synth".into(), "--out".into(), "x".into(), "--config".into(), cfg.display().to_string()];
        assert!(apply_config(argv).is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
