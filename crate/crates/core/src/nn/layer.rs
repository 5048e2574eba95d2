use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Sigmoid,
    Softmax,
    Identity,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
            Activation::Softmax => 2,
            Activation::Identity => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Sigmoid),
            2 => Some(Activation::Softmax),
            3 => Some(Activation::Identity),
            _ => None,
        }
    }

    fn apply(self, z: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Relu => z.mapv(|v| v.max(0.0)),
            Activation::Sigmoid => z.mapv(sigmoid),
            Activation::Identity => z.clone(),
            Activation::Softmax => {
                let mut out = z.clone();
                for mut row in out.rows_mut() {
                    softmax_in_place(row.as_slice_mut().expect("row-major"));
                }
                out
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// `h = σ(W x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out_dim × in_dim`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            weights: Array2::zeros((out_dim, in_dim)),
            bias: Array1::zeros(out_dim),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn pre_activation(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights.t());
        z += &self.bias;
        z
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Inverted dropout with drop probability `p` after every hidden layer.
    Train { dropout_p: f64 },
    Infer,
}

/// Everything `backward` needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `activations[0]` is the input, `activations[l + 1]` the (masked)
    /// output of layer `l`.
    pub activations: Vec<Array2<f64>>,
    /// Pre-activations of every layer.
    pub pre_activations: Vec<Array2<f64>>,
    /// Scaled keep-masks applied after hidden layers in train mode.
    pub masks: Vec<Option<Array2<f64>>>,
    revision: u64,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("at least the input")
    }

    /// Pre-activation of the last layer.
    pub fn logits(&self) -> &Array2<f64> {
        self.pre_activations.last().expect("at least one layer")
    }
}

/// Parameter gradients, shaped like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub bias: Vec<Array1<f64>>,
}

/// Feed-forward network of dense layers.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
    /// Spectrogram frames per network input; 0 when the input is not a
    /// spectrogram context window.
    pub context_frames: u32,
    revision: u64,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.context_frames == other.context_frames
    }
}

impl Mlp {
    pub fn from_layers(layers: Vec<DenseLayer>, context_frames: u32) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter("a network needs at least one layer".into()));
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::Dimension(format!(
                    "layer {i} emits {} values, layer {} expects {}",
                    w[0].out_dim(),
                    i + 1,
                    w[1].in_dim()
                )));
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return Err(Error::Dimension(format!("layer {i} bias length")));
            }
            if l.weights.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("layer {i} parameters")));
            }
        }
        Ok(Self {
            layers,
            context_frames,
            revision: 0,
        })
    }

    /// Randomly initialised network: `sizes[0]` inputs, hidden layers with
    /// `hidden` activation, and an output layer with `output` activation.
    ///
    /// Hidden weights are He-uniform, output weights Glorot-uniform and
    /// biases zero.
    pub fn new(sizes: &[usize], hidden: Activation, output: Activation, seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidParameter(format!("bad layer sizes {sizes:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = sizes.len() - 1;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let last = i + 1 == n;
                let limit = if last {
                    (6.0 / (fan_in + fan_out) as f64).sqrt()
                } else {
                    (6.0 / fan_in as f64).sqrt()
                };
                let dist = Uniform::new_inclusive(-limit, limit);
                DenseLayer {
                    weights: Array2::from_shape_simple_fn((fan_out, fan_in), || dist.sample(&mut rng)),
                    bias: Array1::zeros(fan_out),
                    activation: if last { output } else { hidden },
                }
            })
            .collect();
        Self::from_layers(layers, 0)
    }

    pub fn with_context_frames(mut self, frames: u32) -> Self {
        self.context_frames = frames;
        self
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim()
    }

    pub fn n_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Marks cached activations from earlier passes as stale.
    pub(crate) fn touch(&mut self) {
        self.revision += 1;
    }

    /// Forward pass over a batch (one sample per row).
    pub fn forward<R: Rng>(&self, x: ArrayView2<f64>, mode: Mode, rng: &mut R) -> Result<ForwardCache> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        let dropout_p = match mode {
            Mode::Train { dropout_p } if !(0.0..1.0).contains(&dropout_p) => {
                return Err(Error::InvalidParameter(format!("dropout probability {dropout_p}")));
            }
            Mode::Train { dropout_p } => dropout_p,
            Mode::Infer => 0.0,
        };
        let n = self.layers.len();
        let mut activations = Vec::with_capacity(n + 1);
        let mut pre_activations = Vec::with_capacity(n);
        let mut masks = Vec::with_capacity(n);
        activations.push(x.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.pre_activation(&activations[i].view());
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("pre-activation of layer {i}")));
            }
            let mut h = layer.activation.apply(&z);
            let hidden = i + 1 < n;
            let mask = if hidden && dropout_p > 0.0 {
                let keep = 1.0 - dropout_p;
                let scale = 1.0 / keep;
                let m = Array2::from_shape_simple_fn(h.raw_dim(), || {
                    if rng.gen::<f64>() < keep {
                        scale
                    } else {
                        0.0
                    }
                });
                h *= &m;
                Some(m)
            } else {
                None
            };
            pre_activations.push(z);
            activations.push(h);
            masks.push(mask);
        }
        Ok(ForwardCache {
            activations,
            pre_activations,
            masks,
            revision: self.revision,
        })
    }

    /// Inference-mode outputs.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut cache = self.forward(x, Mode::Infer, &mut NoRng)?;
        Ok(cache.activations.pop().expect("output"))
    }

    /// Gradients of the loss given its gradient with respect to the last
    /// layer's pre-activation. Dropout masks recorded in `cache` are replayed.
    pub fn backward(&self, cache: &ForwardCache, grad_logits: ArrayView2<f64>) -> Result<Gradients> {
        let n = self.layers.len();
        if cache.revision != self.revision || cache.pre_activations.len() != n {
            return Err(Error::InvalidParameter("activation cache does not belong to this model state".into()));
        }
        let batch = cache.activations[0].nrows();
        if grad_logits.dim() != (batch, self.output_dim()) {
            return Err(Error::Dimension(format!(
                "loss gradient is {:?}, expected ({batch}, {})",
                grad_logits.dim(),
                self.output_dim()
            )));
        }
        let mut weights = Vec::with_capacity(n);
        let mut bias = Vec::with_capacity(n);
        let mut delta = grad_logits.to_owned();
        for i in (0..n).rev() {
            weights.push(delta.t().dot(&cache.activations[i]));
            bias.push(delta.sum_axis(Axis(0)));
            if i == 0 {
                break;
            }
            let mut upstream = delta.dot(&self.layers[i].weights);
            if let Some(mask) = &cache.masks[i - 1] {
                upstream *= mask;
            }
            let below = &self.layers[i - 1];
            match below.activation {
                Activation::Relu => {
                    Zip::from(&mut upstream)
                        .and(&cache.pre_activations[i - 1])
                        .for_each(|g, &z| {
                            if z <= 0.0 {
                                *g = 0.0
                            }
                        });
                }
                Activation::Sigmoid => {
                    Zip::from(&mut upstream)
                        .and(&cache.pre_activations[i - 1])
                        .for_each(|g, &z| {
                            let s = sigmoid(z);
                            *g *= s * (1.0 - s);
                        });
                }
                Activation::Identity => {}
                Activation::Softmax => {
                    return Err(Error::InvalidParameter("softmax is only supported as the output layer".into()));
                }
            }
            delta = upstream;
        }
        weights.reverse();
        bias.reverse();
        Ok(Gradients { weights, bias })
    }
}

/// Stand-in generator for inference, which never draws.
pub(crate) struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("inference does not draw random numbers")
    }

    fn next_u64(&mut self) -> u64 {
        unreachable!("inference does not draw random numbers")
    }

    fn fill_bytes(&mut self, _: &mut [u8]) {
        unreachable!("inference does not draw random numbers")
    }

    fn try_fill_bytes(&mut self, _: &mut [u8]) -> std::result::Result<(), rand::Error> {
        unreachable!("inference does not draw random numbers")
    }
}
