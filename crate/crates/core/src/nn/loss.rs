use ndarray::{Array2, ArrayView2, Zip};

use super::layer::softmax_in_place;
use crate::{Error, Result};

/// Probability clamp keeping `log` finite.
pub const BCE_EPSILON: f64 = 1e-7;

/// Mean binary cross-entropy over the batch and the output units.
///
/// `p` holds sigmoid outputs and `t` targets in `[0, 1]`. The returned
/// gradient is with respect to the pre-sigmoid logits of the batch-mean loss:
/// `(p - t) / (units * batch)`.
pub fn bce_loss(p: ArrayView2<f64>, t: ArrayView2<f64>) -> Result<(f64, Array2<f64>)> {
    if p.dim() != t.dim() {
        return Err(Error::Dimension(format!("predictions {:?} vs targets {:?}", p.dim(), t.dim())));
    }
    let (batch, units) = p.dim();
    if batch == 0 || units == 0 {
        return Err(Error::Dimension("empty batch".into()));
    }
    let mut total = 0.0;
    Zip::from(&p).and(&t).for_each(|&p, &t| {
        let pc = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
        total += -t * pc.ln() - (1.0 - t) * (1.0 - pc).ln();
    });
    let scale = 1.0 / (batch * units) as f64;
    let grad = Zip::from(&p).and(&t).map_collect(|&p, &t| (p - t) * scale);
    Ok((total * scale, grad))
}

/// Mean softmax cross-entropy of `logits` (one row per sample) against class
/// indices. The gradient is with respect to the logits of the batch-mean
/// loss: `(softmax - one_hot) / batch`.
pub fn softmax_ce_loss(logits: ArrayView2<f64>, classes: &[usize]) -> Result<(f64, Array2<f64>)> {
    let (batch, n_classes) = logits.dim();
    if batch != classes.len() {
        return Err(Error::Dimension(format!("{batch} logit rows for {} labels", classes.len())));
    }
    if batch == 0 {
        return Err(Error::Dimension("empty batch".into()));
    }
    if let Some(&c) = classes.iter().find(|&&c| c >= n_classes) {
        return Err(Error::InvalidParameter(format!("class {c} outside the {n_classes}-class vocabulary")));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("logits".into()));
    }
    let mut grad = logits.to_owned();
    let mut total = 0.0;
    let scale = 1.0 / batch as f64;
    for (mut row, &c) in grad.rows_mut().into_iter().zip(classes) {
        let slice = row.as_slice_mut().expect("row-major");
        let max = slice.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = slice.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        total += log_sum - slice[c];
        softmax_in_place(slice);
        slice[c] -= 1.0;
        slice.iter_mut().for_each(|v| *v *= scale);
    }
    Ok((total * scale, grad))
}
