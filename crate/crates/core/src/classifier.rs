//! Frame-wise multinomial logistic regression over the 25 maj/min classes.
//!
//! The model is a single softmax layer, so it trains through the same
//! gradient, ADAM and early-stopping code as the extractor.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::annotations::{ChordClass, N_CLASSES};
use crate::nn::{self, argmax, Activation, AdamConfig, Dataset, EpochRecord, LossKind, Metric, Mlp, Targets, TrainConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    pub train: TrainConfig,
    /// Train on z-scored features; the scaling is folded back into the
    /// weights afterwards so the saved model takes raw features.
    pub standardize: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig {
                batch_size: 512,
                dropout_p: 0.0,
                patience: 20,
                max_epochs: 300,
                seed: 0,
                loss: LossKind::SoftmaxCe,
                metric: Metric::FrameAccuracy,
                adam: AdamConfig::default(),
                l2: 1e-4,
            },
            standardize: true,
        }
    }
}

/// `W: 25 × d`, `b: 25`, stored as a one-layer softmax network.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    pub net: Mlp,
}

impl LogRegModel {
    /// All-zero weights and biases over `dim` inputs.
    pub fn zeros(dim: usize, context_frames: u32) -> Self {
        let layer = nn::DenseLayer::zeros(dim, N_CLASSES, Activation::Softmax);
        Self {
            net: Mlp::from_layers(vec![layer], context_frames).expect("single layer is consistent"),
        }
    }

    pub fn from_net(net: Mlp) -> Result<Self> {
        if net.layers.len() != 1 || net.output_dim() != N_CLASSES || net.layers[0].activation != Activation::Softmax {
            return Err(Error::Format(format!(
                "a classifier is one softmax layer with {N_CLASSES} outputs"
            )));
        }
        Ok(Self { net })
    }

    pub fn dim(&self) -> usize {
        self.net.input_dim()
    }

    /// Frames stacked into each input row.
    pub fn context_frames(&self) -> u32 {
        self.net.context_frames
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.net.layers[0].weights
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.net.layers[0].bias
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        nn::save_model(&self.net, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_net(nn::load_model(path)?)
    }
}

#[derive(Debug, Clone)]
pub struct LogRegFit {
    pub model: LogRegModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Drops EXCLUDED frames; returns the kept rows and their class indices.
pub fn mappable_rows(x: ArrayView2<f64>, y: &[ChordClass]) -> Result<(Array2<f64>, Vec<usize>)> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension(format!("{} feature rows but {} labels", x.nrows(), y.len())));
    }
    let keep: Vec<usize> = (0..y.len()).filter(|&i| !y[i].is_excluded()).collect();
    let classes = keep.iter().filter_map(|&i| y[i].index()).collect();
    Ok((x.select(Axis(0), &keep), classes))
}

/// Fits the classifier with softmax cross-entropy, early-stopped on
/// validation frame accuracy.
pub fn train_logreg(
    train_x: ArrayView2<f64>,
    train_y: &[ChordClass],
    val_x: ArrayView2<f64>,
    val_y: &[ChordClass],
    context_frames: u32,
    config: &ClassifierConfig,
) -> Result<LogRegFit> {
    if config.train.loss != LossKind::SoftmaxCe {
        return Err(Error::InvalidParameter("the classifier trains with softmax cross-entropy".into()));
    }
    if train_x.ncols() != val_x.ncols() {
        return Err(Error::Dimension("training and validation feature widths differ".into()));
    }
    let (mut tx, ty) = mappable_rows(train_x, train_y)?;
    let (mut vx, vy) = mappable_rows(val_x, val_y)?;
    if ty.is_empty() {
        return Err(Error::Data("no mappable training frames".into()));
    }
    if vy.is_empty() {
        return Err(Error::Data("no mappable validation frames".into()));
    }
    let scaling = config.standardize.then(|| Standardizer::fit(tx.view()));
    if let Some(s) = &scaling {
        s.apply(&mut tx);
        s.apply(&mut vx);
    }
    let init = LogRegModel::zeros(tx.ncols(), context_frames).net;
    let outcome = nn::train(
        init,
        &Dataset::new(tx.view(), Targets::Classes(&ty))?,
        &Dataset::new(vx.view(), Targets::Classes(&vy))?,
        &config.train,
    )?;
    let mut net = outcome.model;
    if let Some(s) = &scaling {
        s.fold_into(&mut net);
    }
    Ok(LogRegFit {
        model: LogRegModel::from_net(net)?,
        history: outcome.history,
        best_epoch: outcome.best_epoch,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub classes: Vec<ChordClass>,
    /// `n_frames × 25` softmax outputs.
    pub probabilities: Array2<f64>,
}

/// Argmax class of every row; ties go to the lowest class index.
pub fn predict_frames(model: &LogRegModel, x: ArrayView2<f64>) -> Result<Prediction> {
    if x.ncols() != model.dim() {
        return Err(Error::Dimension(format!(
            "classifier expects {} features, got {}",
            model.dim(),
            x.ncols()
        )));
    }
    let probabilities = model.net.predict(x)?;
    let classes = probabilities
        .rows()
        .into_iter()
        .map(|r| ChordClass::from_index(argmax(r.iter().copied())).expect("25 outputs"))
        .collect();
    Ok(Prediction { classes, probabilities })
}

/// Per-column affine map to zero mean and unit variance.
#[derive(Debug, Clone)]
struct Standardizer {
    mean: Array1<f64>,
    scale: Array1<f64>,
}

impl Standardizer {
    fn fit(x: ArrayView2<f64>) -> Self {
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let scale = x
            .std_axis(Axis(0), 0.0)
            .mapv(|s| if s > 1e-9 { 1.0 / s } else { 1.0 });
        Self { mean, scale }
    }

    fn apply(&self, x: &mut Array2<f64>) {
        for mut row in x.rows_mut() {
            row -= &self.mean;
            row *= &self.scale;
        }
    }

    /// `W (s ⊙ (x − μ)) + b = (W diag s) x + (b − W diag s μ)`.
    fn fold_into(&self, net: &mut Mlp) {
        let layer = &mut net.layers[0];
        for mut row in layer.weights.rows_mut() {
            row *= &self.scale;
        }
        layer.bias = &layer.bias - &layer.weights.dot(&self.mean);
    }
}
