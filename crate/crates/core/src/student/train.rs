use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

use super::loss::{pairwise_into, pointwise_into, PairExample, PointExample};
use super::model::StudentModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Pointwise,
    Pairwise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Margin coefficient in `[0, 1]`.
    pub alpha: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Weight decay on every parameter.
    pub l2: f64,
    pub seed: u64,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.5,
            learning_rate: 0.1,
            epochs: 200,
            batch_size: 32,
            l2: 0.0,
            seed: 0,
            loss: LossKind::Pointwise,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::param("alpha", format!("{} is not in [0, 1]", self.alpha)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param("learning_rate", "must be positive and finite"));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size", "must be positive"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::param("l2", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub enum TrainData<'a> {
    Pointwise(&'a [PointExample]),
    Pairwise(&'a [PairExample]),
}

impl TrainData<'_> {
    fn len(&self) -> usize {
        match self {
            TrainData::Pointwise(d) => d.len(),
            TrainData::Pairwise(d) => d.len(),
        }
    }

    fn kind(&self) -> LossKind {
        match self {
            TrainData::Pointwise(_) => LossKind::Pointwise,
            TrainData::Pairwise(_) => LossKind::Pairwise,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub model: StudentModel,
    /// Mean data loss per epoch, as seen during that epoch's updates.
    pub trace: Vec<f64>,
}

/// Mini-batch gradient descent with per-epoch shuffling.
pub fn train(mut model: StudentModel, data: TrainData<'_>, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if data.len() == 0 {
        return Err(Error::Empty("training data"));
    }
    if data.kind() != config.loss {
        return Err(Error::param(
            "loss",
            format!("{:?} loss configured for {:?} data", config.loss, data.kind()),
        ));
    }
    let mut rng = rng::scoped(config.seed, "train", "shuffle");
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = vec![0.0; model.parameter_count()];
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / chunk.len() as f64;
            let mut batch_loss = 0.0;
            for &i in chunk {
                batch_loss += match data {
                    TrainData::Pointwise(d) => pointwise_into(&model, &d[i].features, d[i].target, scale, &mut grad),
                    TrainData::Pairwise(d) => pairwise_into(&model, &d[i], config.alpha, scale, &mut grad),
                };
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }
            epoch_loss += batch_loss;
            for (t, g) in model.theta.iter_mut().zip(&grad) {
                *t -= config.learning_rate * (g + config.l2 * *t);
            }
        }
        trace.push(epoch_loss / data.len() as f64);
    }
    Ok(TrainOutcome { model, trace })
}

/// `epoch,mean_loss` CSV, epochs numbered from 1.
pub fn loss_trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("epoch,mean_loss\n");
    for (i, loss) in trace.iter().enumerate() {
        let _ = writeln!(out, "{},{:.6}", i + 1, loss);
    }
    out
}
