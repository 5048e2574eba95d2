//! Dense feed-forward networks trained with ADAM.

mod adam;
mod io;
mod layer;
pub(crate) use layer::NoRng;
mod loss;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use io::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC};
pub use layer::{sigmoid, Activation, DenseLayer, ForwardCache, Gradients, Mlp, Mode};
pub use loss::{bce_loss, softmax_ce_loss, BCE_EPSILON};
pub use train::{argmax, evaluate, train, Dataset, EpochRecord, LossKind, Metric, Targets, TrainConfig, TrainOutcome};
