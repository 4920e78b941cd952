//! A small spiking-network engine: rate encoding, LIF layers, surrogate-gradient
//! BPTT and a deterministic SGD training loop.

pub mod checkpoint;
mod lif;
mod loss;
mod model;
mod spike;
mod train;

pub use lif::{lif_step, surrogate_grad, LifConfig, LifState, ResetMode};
pub use loss::{loss_fair_penalized, loss_task, loss_task_grad, penalty_grad, FairPenaltyConfig, LossMode, PenalizedLoss};
pub use model::{Dense, Gradients, Logits, Model, SpikeMode, SpikingLayer, Trace};
pub(crate) use model::ForwardHooks;
pub use spike::{rate_encode, Encoder, RateEncoder, SpikeTrain};
pub use train::{
    batch_objective, cosine_lr, encode_sample, evaluate, train_epoch, BatchLoss, EpochStats, Evaluation, Example, Hyper, Sgd,
};
