use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{loss_fair_penalized, loss_task, loss_task_grad, penalty_grad, softmax, FairPenaltyConfig, LossMode};
use super::model::{Gradients, Model, SpikeMode};
use super::spike::{rate_encode, SpikeTrain};
use crate::bias::Dataset;
use crate::error::{Error, Result};
use crate::fairness::{GroupId, Ratio};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub momentum: f64,
    pub loss: LossMode,
    pub fairness: Option<FairPenaltyConfig>,
    pub timesteps: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            learning_rate: 0.02,
            batch_size: 32,
            momentum: 0.9,
            loss: LossMode::Tet,
            fairness: None,
            timesteps: 4,
        }
    }
}

/// SGD with heavy-ball momentum: `v = m v + g; w -= lr v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub momentum: f64,
    velocity: Gradients,
}

impl Sgd {
    pub fn new(model: &Model, momentum: f64) -> Self {
        Self {
            momentum,
            velocity: Gradients::zeros_like(model),
        }
    }

    pub fn step(&mut self, model: &mut Model, grads: &Gradients, lr: f64) {
        for ((w, v), g) in model
            .layers_mut()
            .zip(self.velocity.layers.iter_mut())
            .zip(&grads.layers)
        {
            for ((p, vel), gr) in w
                .weights
                .iter_mut()
                .chain(w.bias.iter_mut())
                .zip(v.weights.iter_mut().chain(v.bias.iter_mut()))
                .zip(g.weights.iter().chain(&g.bias))
            {
                *vel = self.momentum * *vel + gr;
                *p -= lr * *vel;
            }
        }
    }
}

/// Learning rate at `epoch` of `total` under cosine annealing to zero.
pub fn cosine_lr(base: f64, epoch: usize, total: usize) -> f64 {
    if total == 0 {
        return base;
    }
    base * 0.5 * (1.0 + (std::f64::consts::PI * epoch as f64 / total as f64).cos())
}

/// One encoded training example.
#[derive(Debug, Clone)]
pub struct Example {
    pub input: SpikeTrain,
    pub label: usize,
    pub group: GroupId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    /// Mean task loss plus the fairness penalty.
    pub value: f64,
    pub task: f64,
    pub penalty: f64,
    pub predictions: Vec<usize>,
}

/// Loss over a batch and its gradient with respect to every parameter.
pub fn batch_objective(
    model: &Model,
    batch: &[Example],
    loss: LossMode,
    fairness: Option<&FairPenaltyConfig>,
    mode: SpikeMode,
) -> Result<(BatchLoss, Gradients)> {
    let b = batch.len() as f64;
    let mut passes = Vec::with_capacity(batch.len());
    let mut task = 0.0;
    for ex in batch {
        let (logits, trace) = model.forward_traced(&ex.input, mode)?;
        task += loss_task(&logits, ex.label, loss)?;
        passes.push((logits, trace));
    }
    task /= b;

    let mut value = task;
    let mut penalty = 0.0;
    let mut prob_grads: Option<(usize, Vec<f64>, Vec<Vec<f64>>)> = None;
    if let Some(cfg) = fairness {
        let k = cfg.positive_class;
        if k >= model.classes() {
            return Err(Error::Domain(format!("positive class {k} out of range")));
        }
        let probs: Vec<Vec<f64>> = passes.iter().map(|(l, _)| softmax(&l.mean())).collect();
        let pos: Vec<f64> = probs.iter().map(|p| p[k]).collect();
        let groups: Vec<GroupId> = batch.iter().map(|e| e.group).collect();
        let labels: Vec<usize> = batch.iter().map(|e| e.label).collect();
        let out = loss_fair_penalized(task, &pos, &groups, &labels, cfg)?;
        value = out.value;
        penalty = out.penalty;
        if penalty > 0.0 {
            prob_grads = Some((k, penalty_grad(&pos, &groups, &labels, cfg)?, probs));
        }
    }

    let mut grads = Gradients::zeros_like(model);
    let mut predictions = Vec::with_capacity(batch.len());
    for (i, (ex, (logits, trace))) in batch.iter().zip(&passes).enumerate() {
        predictions.push(logits.predict());
        let mut d = loss_task_grad(logits, ex.label, loss)?;
        d.iter_mut().for_each(|g| *g /= b);
        if let Some((k, pg, probs)) = &prob_grads {
            // d p_k / d logits[t][j] = p_k (1[j = k] - p_j) / T
            let p = &probs[i];
            let scale = pg[i] * p[*k] / logits.timesteps as f64;
            for t in 0..logits.timesteps {
                for (j, &pj) in p.iter().enumerate() {
                    d[t * logits.classes + j] += scale * ((j == *k) as u8 as f64 - pj);
                }
            }
        }
        model.backward(trace, &d, &mut grads);
    }
    Ok((
        BatchLoss {
            value,
            task,
            penalty,
            predictions,
        },
        grads,
    ))
}

/// Predictions and per-group accuracy on a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub predictions: Vec<usize>,
    pub accuracy: Ratio,
    pub acc_by_group: BTreeMap<GroupId, Ratio>,
}

impl Evaluation {
    pub fn from_predictions(data: &Dataset, predictions: Vec<usize>) -> Result<Self> {
        if predictions.len() != data.len() {
            return Err(Error::dim("evaluation predictions", data.len(), predictions.len()));
        }
        let mut per: BTreeMap<GroupId, (u64, u64)> = BTreeMap::new();
        for (s, &p) in data.samples().iter().zip(&predictions) {
            let e = per.entry(s.group).or_default();
            e.0 += (p == s.label) as u64;
            e.1 += 1;
        }
        let correct = per.values().map(|v| v.0).sum();
        Ok(Self {
            accuracy: Ratio::new(correct, data.len() as u64)?,
            acc_by_group: per
                .into_iter()
                .map(|(g, (c, n))| Ok((g, Ratio::new(c, n)?)))
                .collect::<Result<_>>()?,
            predictions,
        })
    }

    /// Accuracy over samples whose label is `class`.
    pub fn class_accuracy(&self, data: &Dataset, class: usize) -> Option<f64> {
        let (c, n) = data
            .samples()
            .iter()
            .zip(&self.predictions)
            .filter(|(s, _)| s.label == class)
            .fold((0u64, 0u64), |(c, n), (s, &p)| (c + (p == s.label) as u64, n + 1));
        (n > 0).then(|| c as f64 / n as f64)
    }
}

/// Rate-encodes sample `index` from its own substream of `seed`.
pub fn encode_sample(features: &[f64], timesteps: usize, seed: u64, index: usize) -> Result<SpikeTrain> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rate_encode(features, timesteps, &mut rng)
}

/// Evaluates every sample with its own encoding substream, so the result does
/// not depend on evaluation order.
pub fn evaluate(model: &Model, data: &Dataset, timesteps: usize, seed: u64) -> Result<Evaluation> {
    let predictions = data
        .samples()
        .iter()
        .enumerate()
        .map(|(i, s)| Ok(model.forward(&encode_sample(&s.features, timesteps, seed, i)?)?.predict()))
        .collect::<Result<Vec<_>>>()?;
    Evaluation::from_predictions(data, predictions)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    pub mean_penalty: f64,
    /// Accuracy of the in-epoch training predictions (before each update).
    pub train_accuracy: Ratio,
    pub holdout: Evaluation,
}

/// One pass over `train` in a shuffled order drawn from `rng`, then an
/// evaluation on `holdout` with `eval_seed`.
pub fn train_epoch<R: Rng + ?Sized>(
    model: &mut Model,
    optimizer: &mut Sgd,
    train: &Dataset,
    holdout: &Dataset,
    hyper: &Hyper,
    learning_rate: f64,
    eval_seed: u64,
    rng: &mut R,
) -> Result<EpochStats> {
    if train.is_empty() {
        return Err(Error::Domain("training set is empty".into()));
    }
    if hyper.batch_size == 0 {
        return Err(Error::Domain("batch size must be positive".into()));
    }
    if train.feature_len() != model.input_width() {
        return Err(Error::dim("training features", model.input_width(), train.feature_len()));
    }
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(rng);

    let (mut loss_sum, mut penalty_sum, mut correct) = (0.0, 0.0, 0u64);
    let batches = order.chunks(hyper.batch_size);
    let n_batches = batches.len();
    for (bi, chunk) in batches.enumerate() {
        let batch = chunk
            .iter()
            .map(|&i| {
                let s = &train.samples()[i];
                Ok(Example {
                    input: rate_encode(&s.features, hyper.timesteps, rng)?,
                    label: s.label,
                    group: s.group,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (loss, grads) = batch_objective(model, &batch, hyper.loss, hyper.fairness.as_ref(), SpikeMode::Hard)?;
        if !loss.value.is_finite() || grads.flat().iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss { batch: bi });
        }
        loss_sum += loss.value;
        penalty_sum += loss.penalty;
        correct += batch
            .iter()
            .zip(&loss.predictions)
            .filter(|(e, &p)| e.label == p)
            .count() as u64;
        optimizer.step(model, &grads, learning_rate);
    }

    Ok(EpochStats {
        mean_loss: loss_sum / n_batches as f64,
        mean_penalty: penalty_sum / n_batches as f64,
        train_accuracy: Ratio::new(correct, train.len() as u64)?,
        holdout: evaluate(model, holdout, hyper.timesteps, eval_seed)?,
    })
}
