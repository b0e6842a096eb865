//! Plain mini-batch SGD on mean squared error.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::net::{ModelParams, ParamVars};
use crate::error::{Error, Result};
use crate::haze::Dataset;
use crate::rng;
use crate::tensor::{Gradients, Tape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainLoss {
    Mse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f32,
    pub seed: u64,
    pub loss: TrainLoss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 30, batch_size: 8, lr: 0.2, seed: 0, loss: TrainLoss::Mse }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::config(format!("learning rate must be finite and non-negative, got {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Batch loss after each optimizer step.
    pub loss_history: Vec<f64>,
}

/// Gradients for every layer, in layer order.
pub(crate) fn layer_grads(grads: &mut Gradients, vars: &ParamVars) -> Vec<(Tensor, Tensor)> {
    vars.layers
        .iter()
        .map(|&(w, b)| {
            (
                grads.take(w).expect("weights are recorded as params"),
                grads.take(b).expect("biases are recorded as params"),
            )
        })
        .collect()
}

/// Stack the hazy and clear images of the given pair indices.
pub(crate) fn batch(dataset: &Dataset, indices: &[usize]) -> Result<(Tensor, Tensor)> {
    let hazy: Vec<&Tensor> = indices.iter().map(|&i| &dataset.pairs[i].hazy).collect();
    let clear: Vec<&Tensor> = indices.iter().map(|&i| &dataset.pairs[i].clear).collect();
    Ok((Tensor::stack(&hazy)?, Tensor::stack(&clear)?))
}

/// Epoch `e` visits the pairs in a permutation drawn from `(seed, e)`.
pub(crate) fn epoch_order(len: usize, seed: u64, stream: &str, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng::substream(seed, stream, epoch as u64));
    order
}

pub fn train(params: &ModelParams, dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::config("training dataset is empty"));
    }
    let mut params = params.clone();
    let mut history = Vec::new();
    for epoch in 0..cfg.epochs {
        let order = epoch_order(dataset.len(), cfg.seed, "shuffle", epoch);
        for chunk in order.chunks(cfg.batch_size) {
            let (hazy, clear) = batch(dataset, chunk)?;
            let mut tape = Tape::new();
            let vars = params.record(&mut tape, true);
            let x = tape.constant(hazy);
            let y = tape.constant(clear);
            let pred = ModelParams::forward_on_tape(&mut tape, &vars, x)?;
            let loss = tape.mse(pred, y)?;
            let value = tape.value(loss).item()? as f64;
            if !value.is_finite() {
                return Err(Error::Diverged { step: history.len(), loss: value });
            }
            let mut grads = tape.backward(loss)?;
            params.sgd_step(&layer_grads(&mut grads, &vars), cfg.lr);
            history.push(value);
        }
    }
    if !params.all_finite() {
        return Err(Error::Diverged { step: history.len(), loss: f64::NAN });
    }
    Ok(TrainOutcome { params, loss_history: history })
}
