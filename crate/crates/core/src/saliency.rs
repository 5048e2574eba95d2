//! Guided backpropagation through a trained extractor, and the time and
//! frequency aggregations of the resulting maps.

use std::collections::BTreeMap;

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};

use crate::annotations::{chord_template, ChordClass};
use crate::nn::{Activation, Mlp, Mode, NoRng};
use crate::{Error, Result};

/// Rows per backward chunk.
const CHUNK: usize = 256;

/// Output units whose logits are seeded with gradient 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selector {
    All,
    Units(Vec<usize>),
}

impl Selector {
    /// The template pitch classes of a maj/min class; no-chord and excluded
    /// frames select nothing.
    pub fn template(class: ChordClass) -> Self {
        let units = class.symbol().map(|s| chord_template(&s).active()).unwrap_or_default();
        Selector::Units(units)
    }

    fn seed(&self, n_out: usize) -> Result<Array1<f64>> {
        let mut seed = Array1::zeros(n_out);
        match self {
            Selector::All => seed.fill(1.0),
            Selector::Units(units) => {
                for &u in units {
                    if u >= n_out {
                        return Err(Error::InvalidParameter(format!(
                            "output unit {u} out of range for {n_out} outputs"
                        )));
                    }
                    seed[u] = 1.0;
                }
            }
        }
        Ok(seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientRule {
    /// Rectifiers pass gradient where their input was positive and the
    /// incoming gradient is positive.
    Guided,
    /// Ordinary backpropagation to the input.
    Plain,
}

/// Saliency over one network input, `context_frames × bands`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    pub data: Array2<f64>,
}

impl SaliencyMap {
    /// Reshapes a flat input-space gradient; time runs down the rows.
    pub fn from_flat(flat: Array1<f64>, context_frames: usize) -> Result<Self> {
        let n = flat.len();
        if context_frames == 0 || n % context_frames != 0 {
            return Err(Error::Dimension(format!("{n} values do not split into {context_frames} frames")));
        }
        let data = flat
            .into_shape_with_order((context_frames, n / context_frames))
            .map_err(|e| Error::Dimension(e.to_string()))?;
        Ok(Self { data })
    }

    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn bands(&self) -> usize {
        self.data.ncols()
    }
}

/// Input-space gradients for a batch, one row per input, given a per-row
/// seed on the output logits.
pub fn backprop_to_input(model: &Mlp, x: ArrayView2<f64>, seeds: ArrayView2<f64>, rule: GradientRule) -> Result<Array2<f64>> {
    if seeds.dim() != (x.nrows(), model.output_dim()) {
        return Err(Error::Dimension(format!(
            "seed is {:?}, expected ({}, {})",
            seeds.dim(),
            x.nrows(),
            model.output_dim()
        )));
    }
    let n = model.layers.len();
    for l in &model.layers[..n - 1] {
        if !matches!(l.activation, Activation::Relu | Activation::Identity) {
            return Err(Error::InvalidParameter(
                "saliency needs rectifier or identity hidden layers".into(),
            ));
        }
    }
    let mut out = Array2::zeros((x.nrows(), model.input_dim()));
    for start in (0..x.nrows()).step_by(CHUNK) {
        let end = (start + CHUNK).min(x.nrows());
        let cache = model.forward(x.slice(s![start..end, ..]), Mode::Infer, &mut NoRng)?;
        let mut g = seeds.slice(s![start..end, ..]).to_owned();
        for i in (0..n).rev() {
            g = g.dot(&model.layers[i].weights);
            if i == 0 {
                break;
            }
            if model.layers[i - 1].activation == Activation::Relu {
                Zip::from(&mut g).and(&cache.pre_activations[i - 1]).for_each(|g, &z| {
                    let open = z > 0.0 && (rule == GradientRule::Plain || *g > 0.0);
                    if !open {
                        *g = 0.0;
                    }
                });
            }
        }
        out.slice_mut(s![start..end, ..]).assign(&g);
    }
    Ok(out)
}

fn context_of(model: &Mlp) -> usize {
    match model.context_frames {
        0 => 1,
        c => c as usize,
    }
}

/// Guided-backprop saliency of one input.
pub fn guided_backprop(model: &Mlp, superframe: &[f64], selector: &Selector) -> Result<SaliencyMap> {
    let x = ArrayView2::from_shape((1, superframe.len()), superframe).map_err(|e| Error::Dimension(e.to_string()))?;
    let seed = selector.seed(model.output_dim())?.insert_axis(Axis(0));
    let g = backprop_to_input(model, x, seed.view(), GradientRule::Guided)?;
    SaliencyMap::from_flat(g.row(0).to_owned(), context_of(model))
}

/// Element-wise mean, accumulated in the given order.
pub fn mean_of_maps(maps: &[SaliencyMap]) -> Result<SaliencyMap> {
    let first = maps.first().ok_or_else(|| Error::InvalidParameter("no maps to average".into()))?;
    let mut acc = Array2::zeros(first.data.raw_dim());
    for m in maps {
        if m.data.dim() != acc.dim() {
            return Err(Error::Dimension("saliency maps differ in shape".into()));
        }
        acc += &m.data;
    }
    Ok(SaliencyMap {
        data: acc / maps.len() as f64,
    })
}

/// Mean guided-backprop map over every row of `x` with one selector.
pub fn average_maps(model: &Mlp, x: ArrayView2<f64>, selector: &Selector) -> Result<SaliencyMap> {
    if x.nrows() == 0 {
        return Err(Error::InvalidParameter("no inputs to average".into()));
    }
    let seed = selector.seed(model.output_dim())?;
    let seeds = Array2::from_shape_fn((x.nrows(), seed.len()), |(_, j)| seed[j]);
    let g = backprop_to_input(model, x, seeds.view(), GradientRule::Guided)?;
    let mean = g.sum_axis(Axis(0)) / x.nrows() as f64;
    SaliencyMap::from_flat(mean, context_of(model))
}

/// Mean map per reference chord, each seeded on that chord's template units.
/// No-chord and excluded frames are skipped.
pub fn average_by_chord(model: &Mlp, x: ArrayView2<f64>, labels: &[ChordClass]) -> Result<BTreeMap<ChordClass, SaliencyMap>> {
    if labels.len() != x.nrows() {
        return Err(Error::Dimension(format!("{} labels for {} inputs", labels.len(), x.nrows())));
    }
    let mut groups: BTreeMap<ChordClass, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        if matches!(c, ChordClass::Major(_) | ChordClass::Minor(_)) {
            groups.entry(c).or_default().push(i);
        }
    }
    groups
        .into_iter()
        .map(|(c, rows)| Ok((c, average_maps(model, x.select(Axis(0), &rows).view(), &Selector::template(c))?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SummedOver {
    Time,
    Frequency,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedSaliency {
    pub summed_over: SummedOver,
    /// Net profile: one value per band (time summed) or per frame.
    pub values: Array1<f64>,
    /// Positive and negative parts, when split.
    pub split: Option<(Array1<f64>, Array1<f64>)>,
}

/// Column sums over the context axis: one value per band.
pub fn sum_over_time(map: &SaliencyMap) -> AggregatedSaliency {
    AggregatedSaliency {
        summed_over: SummedOver::Time,
        values: map.data.sum_axis(Axis(0)),
        split: None,
    }
}

/// Per-frame sums of the positive and of the negative entries.
pub fn sum_over_freq_signed(map: &SaliencyMap) -> AggregatedSaliency {
    let pos = map.data.map_axis(Axis(1), |r| r.iter().filter(|v| **v > 0.0).sum::<f64>());
    let neg = map.data.map_axis(Axis(1), |r| r.iter().filter(|v| **v < 0.0).sum::<f64>());
    AggregatedSaliency {
        summed_over: SummedOver::Frequency,
        values: &pos + &neg,
        split: Some((pos, neg)),
    }
}
