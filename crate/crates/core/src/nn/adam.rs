use ndarray::{Array1, Array2, Zip};

use super::layer::{Gradients, Mlp};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            alpha: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates for every parameter of a network.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    /// Steps taken so far.
    pub t: u64,
    m_weights: Vec<Array2<f64>>,
    v_weights: Vec<Array2<f64>>,
    m_bias: Vec<Array1<f64>>,
    v_bias: Vec<Array1<f64>>,
}

impl AdamState {
    pub fn new(model: &Mlp, config: AdamConfig) -> Self {
        Self {
            config,
            t: 0,
            m_weights: model.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
            v_weights: model.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
            m_bias: model.layers.iter().map(|l| Array1::zeros(l.bias.len())).collect(),
            v_bias: model.layers.iter().map(|l| Array1::zeros(l.bias.len())).collect(),
        }
    }

    /// Applies one ADAM update to `model`.
    pub fn step(&mut self, model: &mut Mlp, grads: &Gradients) -> Result<()> {
        if grads.weights.len() != model.layers.len() || grads.bias.len() != model.layers.len() {
            return Err(Error::Dimension("gradient count differs from layer count".into()));
        }
        for (i, layer) in model.layers.iter().enumerate() {
            if grads.weights[i].dim() != layer.weights.dim() || grads.bias[i].len() != layer.bias.len() {
                return Err(Error::Dimension(format!("gradient shape of layer {i}")));
            }
        }
        if grads
            .weights
            .iter()
            .flat_map(|g| g.iter())
            .chain(grads.bias.iter().flat_map(|g| g.iter()))
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("gradient".into()));
        }
        self.t += 1;
        let c = Corrections::new(&self.config, self.t);
        for (i, layer) in model.layers.iter_mut().enumerate() {
            Zip::from(&mut layer.weights)
                .and(&grads.weights[i])
                .and(&mut self.m_weights[i])
                .and(&mut self.v_weights[i])
                .for_each(|p, &g, m, v| c.update(p, g, m, v));
            Zip::from(&mut layer.bias)
                .and(&grads.bias[i])
                .and(&mut self.m_bias[i])
                .and(&mut self.v_bias[i])
                .for_each(|p, &g, m, v| c.update(p, g, m, v));
        }
        model.touch();
        Ok(())
    }
}

/// ADAM over plain slices, for callers optimising something other than an
/// [`Mlp`]. `t` is incremented before use.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: &mut u64,
    config: &AdamConfig,
) -> Result<()> {
    let n = params.len();
    if grads.len() != n || m.len() != n || v.len() != n {
        return Err(Error::Dimension("parameter, gradient and moment lengths differ".into()));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient".into()));
    }
    *t += 1;
    let c = Corrections::new(config, *t);
    for i in 0..n {
        c.update(&mut params[i], grads[i], &mut m[i], &mut v[i]);
    }
    Ok(())
}

struct Corrections {
    config: AdamConfig,
    bias1: f64,
    bias2: f64,
}

impl Corrections {
    fn new(config: &AdamConfig, t: u64) -> Self {
        let t = t.min(i32::MAX as u64) as i32;
        Self {
            config: *config,
            bias1: 1.0 - config.beta1.powi(t),
            bias2: 1.0 - config.beta2.powi(t),
        }
    }

    #[inline]
    fn update(&self, p: &mut f64, g: f64, m: &mut f64, v: &mut f64) {
        let AdamConfig { alpha, beta1, beta2, eps } = self.config;
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / self.bias1;
        let v_hat = *v / self.bias2;
        *p -= alpha * m_hat / (v_hat.sqrt() + eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_step(g: f64) -> f64 {
        let (mut p, mut m, mut v, mut t) = ([0.0], [0.0], [0.0], 0);
        adam_step(&mut p, &[g], &mut m, &mut v, &mut t, &AdamConfig::default()).unwrap();
        assert_eq!(t, 1);
        p[0]
    }

    #[test]
    fn first_step_moves_by_alpha() {
        // below |g| ~ 1e-2 the eps term alone moves the step by more than 1e-9
        for g in [1.0, -1.0, 0.02, 42.0, -7.5e4] {
            let delta = one_step(g);
            assert!((delta + 0.001 * g.signum()).abs() < 1e-9, "g {g}: {delta}");
        }
    }

    #[test]
    fn first_step_closed_form() {
        for g in [1e-9f64, -1e-4, 0.5, 3.0e3] {
            let expected = -0.001 * g / (g.abs() + 1e-8);
            assert!((one_step(g) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        assert_eq!(one_step(0.0), 0.0);
    }

    #[test]
    fn descends_a_parabola() {
        let cfg = AdamConfig::default();
        let (mut p, mut m, mut v, mut t) = ([1.0], [0.0], [0.0], 0);
        let mut prev = 1.0f64;
        for _ in 0..100 {
            let g = [2.0 * p[0]];
            adam_step(&mut p, &g, &mut m, &mut v, &mut t, &cfg).unwrap();
            assert!(p[0].abs() < prev.abs());
            prev = p[0];
        }
        assert!(p[0] < 0.95);
    }

    #[test]
    fn rejects_non_finite_gradients() {
        let (mut p, mut m, mut v, mut t) = ([0.0], [0.0], [0.0], 0);
        let cfg = AdamConfig::default();
        assert!(adam_step(&mut p, &[f64::NAN], &mut m, &mut v, &mut t, &cfg).is_err());
        assert_eq!(t, 0);
    }
}
