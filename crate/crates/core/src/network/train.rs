//! Softmax cross-entropy training with Adam.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::network::{LayerParams, NetworkModel, Tensor};
use crate::rng::{derive_seed, rng_from_seed};

/// Optimizer and schedule settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 15,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::Parameter("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Parameter("betas must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// First/second moment accumulators, one pair per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<LayerParams>,
    pub v: Vec<LayerParams>,
    pub t: u64,
}

impl AdamState {
    pub fn new(model: &NetworkModel) -> Self {
        let zeros: Vec<LayerParams> = model
            .params
            .iter()
            .map(|p| LayerParams {
                weights: vec![0.0; p.weights.len()],
                bias: vec![0.0; p.bias.len()],
            })
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

fn adam_update(
    p: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    cfg: &TrainConfig,
    bias1: f64,
    bias2: f64,
) {
    for i in 0..p.len() {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        p[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// One bias-corrected Adam step over all layers; increments `state.t`.
pub fn adam_step(
    params: &mut [LayerParams],
    grads: &[LayerParams],
    state: &mut AdamState,
    cfg: &TrainConfig,
) {
    state.t += 1;
    let bias1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let bias2 = 1.0 - cfg.beta2.powi(state.t as i32);
    for (i, p) in params.iter_mut().enumerate() {
        adam_update(
            &mut p.weights,
            &grads[i].weights,
            &mut state.m[i].weights,
            &mut state.v[i].weights,
            cfg,
            bias1,
            bias2,
        );
        adam_update(
            &mut p.bias,
            &grads[i].bias,
            &mut state.m[i].bias,
            &mut state.v[i].bias,
            cfg,
            bias1,
            bias2,
        );
    }
}

/// Numerically stable softmax cross-entropy: loss and d(loss)/d(scores).
pub fn softmax_cross_entropy(scores: &[f64], target: usize) -> (f64, Vec<f64>) {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let loss = z.ln() - (scores[target] - max);
    let mut grad: Vec<f64> = exps.iter().map(|e| e / z).collect();
    grad[target] -= 1.0;
    (loss, grad)
}

/// Mini-batch training with seeded shuffling; returns per-epoch mean
/// losses. Zero epochs leave the model untouched.
pub fn train(
    model: &mut NetworkModel,
    data: &[(Tensor, usize)],
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    let mut shuffle_rng = rng_from_seed(derive_seed(cfg.seed, 0x31));
    let mut state = AdamState::new(model);
    let mut curve = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;

        for batch in order.chunks(cfg.batch_size) {
            let mut acc: Vec<LayerParams> = model
                .params
                .iter()
                .map(|p| LayerParams {
                    weights: vec![0.0; p.weights.len()],
                    bias: vec![0.0; p.bias.len()],
                })
                .collect();
            for &idx in batch {
                let (input, target) = &data[idx];
                let (loss, grads) = model.gradients(input, *target)?;
                if !loss.is_finite() {
                    return Err(Error::Training {
                        epoch,
                        message: format!("non-finite loss on sample {idx}"),
                    });
                }
                epoch_loss += loss;
                for (a, g) in acc.iter_mut().zip(&grads) {
                    for (x, y) in a.weights.iter_mut().zip(&g.weights) {
                        *x += y;
                    }
                    for (x, y) in a.bias.iter_mut().zip(&g.bias) {
                        *x += y;
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for a in acc.iter_mut() {
                for x in a.weights.iter_mut() {
                    *x *= scale;
                }
                for x in a.bias.iter_mut() {
                    *x *= scale;
                }
            }
            adam_step(&mut model.params, &acc, &mut state, cfg);
        }

        let mean = epoch_loss / data.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Training {
                epoch,
                message: format!("mean epoch loss is {mean}"),
            });
        }
        curve.push(mean);
    }
    Ok(curve)
}
