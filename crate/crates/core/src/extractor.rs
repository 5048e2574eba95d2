//! Training the deep chroma extractor on a set of songs.

use ndarray::{concatenate, Array2, Axis};

use crate::annotations::ChordSymbol;
use crate::corpus::Song;
use crate::dsp::{stack_frames, CONTEXT_FRAMES, N_BANDS};
use crate::nn::{self, Activation, Dataset, LossKind, Metric, Mlp, Targets, TrainConfig, TrainOutcome};
use crate::{Error, Result, FPS};

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractorConfig {
    /// Spectrogram frames per super-frame; must be odd.
    pub context_frames: usize,
    pub hidden: Vec<usize>,
    /// Seeds both initialisation and training.
    pub seed: u64,
    pub train: TrainConfig,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self {
            context_frames: CONTEXT_FRAMES,
            hidden: vec![512, 512, 512],
            seed: 0,
            train: TrainConfig::default(),
        }
    }
}

impl ExtractorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.context_frames % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "context must be an odd frame count, got {}",
                self.context_frames
            )));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidParameter("hidden layers need at least one unit".into()));
        }
        if self.train.loss != LossKind::Bce {
            return Err(Error::InvalidParameter("the extractor trains with binary cross-entropy".into()));
        }
        self.train.validate()
    }

    /// Context span in seconds.
    pub fn context_seconds(&self) -> f64 {
        self.context_frames as f64 / FPS
    }
}

/// Super-frames and chord templates of the listed songs. Frames annotated
/// with an unknown chord (`X`) carry no template and are skipped.
pub fn training_data(songs: &[&Song], context_frames: usize) -> Result<(Array2<f64>, Array2<f64>)> {
    let mut inputs = Vec::with_capacity(songs.len());
    let mut targets = Vec::with_capacity(songs.len());
    for song in songs {
        if song.s_log.n_bands() != N_BANDS {
            return Err(Error::Dimension(format!(
                "song {} has {} bands, expected {N_BANDS}",
                song.id,
                song.s_log.n_bands()
            )));
        }
        let keep: Vec<usize> = (0..song.n_frames())
            .filter(|&t| song.annotation.symbol_at(t as f64 / FPS) != Some(&ChordSymbol::Unknown))
            .collect();
        let x = stack_frames(song.s_log.data.view(), context_frames / 2);
        inputs.push(x.select(Axis(0), &keep));
        targets.push(song.targets().select(Axis(0), &keep));
    }
    let join = |parts: Vec<Array2<f64>>| {
        let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
        concatenate(Axis(0), &views).map_err(|e| Error::Dimension(e.to_string()))
    };
    Ok((join(inputs)?, join(targets)?))
}

/// Trains a fresh extractor on `train` songs, early-stopped on `val` songs.
pub fn train_extractor(train: &[&Song], val: &[&Song], config: &ExtractorConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Data("extractor training needs training and validation songs".into()));
    }
    let (tx, ty) = training_data(train, config.context_frames)?;
    let (vx, vy) = training_data(val, config.context_frames)?;
    let mut sizes = vec![config.context_frames * N_BANDS];
    sizes.extend(&config.hidden);
    sizes.push(12);
    let model = Mlp::new(&sizes, Activation::Relu, Activation::Sigmoid, config.seed)?
        .with_context_frames(config.context_frames as u32);
    let train_cfg = TrainConfig {
        seed: config.seed,
        metric: Metric::BitwiseAccuracy,
        ..config.train.clone()
    };
    nn::train(
        model,
        &Dataset::new(tx.view(), Targets::Multilabel(ty.view()))?,
        &Dataset::new(vx.view(), Targets::Multilabel(vy.view()))?,
        &train_cfg,
    )
}
