use ndarray::{s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{AdamConfig, AdamState};
use super::layer::{Mlp, Mode};
use super::loss::{bce_loss, softmax_ce_loss};
use crate::{Error, Result};

/// Rows per inference chunk when scoring a validation set.
const EVAL_CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Sigmoid outputs against multi-label targets.
    Bce,
    /// Softmax outputs against class indices.
    SoftmaxCe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Fraction of output units on the right side of 0.5.
    BitwiseAccuracy,
    /// Fraction of samples whose argmax is the labelled class.
    FrameAccuracy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub dropout_p: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub loss: LossKind,
    pub metric: Metric,
    pub adam: AdamConfig,
    /// L2 penalty `λ/2 ||W||²` on weights (biases are not penalised).
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 512,
            dropout_p: 0.5,
            patience: 20,
            max_epochs: 100,
            seed: 0,
            loss: LossKind::Bce,
            metric: Metric::BitwiseAccuracy,
            adam: AdamConfig::default(),
            l2: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidParameter(format!("dropout probability {}", self.dropout_p)));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidParameter("max_epochs must be at least 1".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::InvalidParameter(format!("L2 penalty {}", self.l2)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Multilabel(ArrayView2<'a, f64>),
    Classes(&'a [usize]),
}

impl Targets<'_> {
    fn len(&self) -> usize {
        match self {
            Targets::Multilabel(t) => t.nrows(),
            Targets::Classes(c) => c.len(),
        }
    }
}

/// Inputs paired with their targets, one sample per row.
#[derive(Debug, Clone, Copy)]
pub struct Dataset<'a> {
    pub inputs: ArrayView2<'a, f64>,
    pub targets: Targets<'a>,
}

impl<'a> Dataset<'a> {
    pub fn new(inputs: ArrayView2<'a, f64>, targets: Targets<'a>) -> Result<Self> {
        if inputs.nrows() != targets.len() {
            return Err(Error::Dimension(format!(
                "{} input rows but {} targets",
                inputs.nrows(),
                targets.len()
            )));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch's batches, penalty included.
    pub train_loss: f64,
    pub val_metric: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights from the epoch with the best validation metric.
    pub model: Mlp,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Mini-batch ADAM training with early stopping on a validation metric.
pub fn train(mut model: Mlp, train_set: &Dataset, val_set: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::InvalidParameter("training and validation sets must be non-empty".into()));
    }
    check_task(&model, train_set, config)?;
    check_task(&model, val_set, config)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(&model, config.adam);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Mlp)> = None;
    let mut stale = 0usize;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let x = train_set.inputs.select(Axis(0), batch);
            let cache = model
                .forward(x.view(), Mode::Train { dropout_p: config.dropout_p }, &mut rng)
                .map_err(|e| diverged(epoch, e))?;
            let (mut loss, grad) = match train_set.targets {
                Targets::Multilabel(t) => bce_loss(cache.output().view(), t.select(Axis(0), batch).view())?,
                Targets::Classes(c) => {
                    let classes: Vec<usize> = batch.iter().map(|&i| c[i]).collect();
                    softmax_ce_loss(cache.logits().view(), &classes)?
                }
            };
            let mut grads = model.backward(&cache, grad.view())?;
            if config.l2 > 0.0 {
                for (g, layer) in grads.weights.iter_mut().zip(&model.layers) {
                    g.scaled_add(config.l2, &layer.weights);
                    loss += 0.5 * config.l2 * layer.weights.iter().map(|w| w * w).sum::<f64>();
                }
            }
            if !loss.is_finite() {
                return Err(Error::Diverged(format!("loss became {loss} in epoch {epoch}")));
            }
            loss_sum += loss * batch.len() as f64;
            adam.step(&mut model, &grads).map_err(|e| diverged(epoch, e))?;
        }
        let val_metric = evaluate(&model, val_set, config.metric).map_err(|e| diverged(epoch, e))?;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            val_metric,
        });
        match &best {
            Some((b, _, _)) if val_metric <= *b => stale += 1,
            _ => {
                best = Some((val_metric, epoch, model.clone()));
                stale = 0;
            }
        }
        if stale >= config.patience {
            break;
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
    })
}

fn diverged(epoch: usize, e: Error) -> Error {
    match e {
        Error::NonFinite(what) => Error::Diverged(format!("non-finite {what} in epoch {epoch}")),
        other => other,
    }
}

fn check_task(model: &Mlp, data: &Dataset, config: &TrainConfig) -> Result<()> {
    if data.inputs.ncols() != model.input_dim() {
        return Err(Error::Dimension(format!(
            "samples have {} features, network expects {}",
            data.inputs.ncols(),
            model.input_dim()
        )));
    }
    match (config.loss, data.targets) {
        (LossKind::Bce, Targets::Multilabel(t)) if t.ncols() == model.output_dim() => Ok(()),
        (LossKind::SoftmaxCe, Targets::Classes(_)) => Ok(()),
        _ => Err(Error::InvalidParameter(
            "loss does not match the target type or output width".into(),
        )),
    }
}

/// Scores `model` on `data` in inference mode.
pub fn evaluate(model: &Mlp, data: &Dataset, metric: Metric) -> Result<f64> {
    let n = data.len();
    if n == 0 {
        return Err(Error::InvalidParameter("empty evaluation set".into()));
    }
    let mut hits = 0.0;
    let mut total = 0.0;
    for start in (0..n).step_by(EVAL_CHUNK) {
        let end = (start + EVAL_CHUNK).min(n);
        let out = model.predict(data.inputs.slice(s![start..end, ..]))?;
        match (metric, data.targets) {
            (Metric::BitwiseAccuracy, Targets::Multilabel(t)) => {
                let t = t.slice(s![start..end, ..]);
                hits += bitwise_hits(&out, &t) as f64;
                total += out.len() as f64;
            }
            (Metric::FrameAccuracy, Targets::Classes(c)) => {
                for (row, &label) in out.rows().into_iter().zip(&c[start..end]) {
                    if argmax(row.iter().copied()) == label {
                        hits += 1.0;
                    }
                    total += 1.0;
                }
            }
            _ => return Err(Error::InvalidParameter("metric does not match the target type".into())),
        }
    }
    Ok(hits / total)
}

fn bitwise_hits(out: &Array2<f64>, targets: &ArrayView2<f64>) -> usize {
    out.iter()
        .zip(targets.iter())
        .filter(|(&p, &t)| (p >= 0.5) == (t >= 0.5))
        .count()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}
