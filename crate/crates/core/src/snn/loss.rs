use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::model::Logits;
use crate::error::{Error, Result};
use crate::fairness::GroupId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Cross-entropy of the time-averaged logits.
    MeanCe,
    /// Mean over timesteps of the per-timestep cross-entropy.
    #[default]
    Tet,
}

fn log_softmax_at(z: &[f64], label: usize) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    z[label] - lse
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn check_label(logits: &Logits, label: usize) -> Result<()> {
    if label >= logits.classes {
        return Err(Error::Domain(format!(
            "label {label} out of range for {} classes",
            logits.classes
        )));
    }
    Ok(())
}

pub fn loss_task(logits: &Logits, label: usize, mode: LossMode) -> Result<f64> {
    check_label(logits, label)?;
    Ok(match mode {
        LossMode::MeanCe => -log_softmax_at(&logits.mean(), label),
        LossMode::Tet => {
            let total: f64 = (0..logits.timesteps)
                .map(|t| -log_softmax_at(logits.step(t), label))
                .sum();
            total / logits.timesteps as f64
        }
    })
}

/// `dL/dlogits` for [`loss_task`], row-major `[T x classes]`.
pub fn loss_task_grad(logits: &Logits, label: usize, mode: LossMode) -> Result<Vec<f64>> {
    check_label(logits, label)?;
    let steps = logits.timesteps as f64;
    let mut grad = Vec::with_capacity(logits.data.len());
    let mean_probs = match mode {
        LossMode::MeanCe => Some(softmax(&logits.mean())),
        LossMode::Tet => None,
    };
    for t in 0..logits.timesteps {
        let p = match &mean_probs {
            Some(p) => p.clone(),
            None => softmax(logits.step(t)),
        };
        grad.extend(
            p.iter()
                .enumerate()
                .map(|(k, &pk)| (pk - (k == label) as u8 as f64) / steps),
        );
    }
    Ok(grad)
}

/// Tolerances and weight for the fairness-penalized objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FairPenaltyConfig {
    #[serde(default = "default_tau")]
    pub tau_sp: f64,
    #[serde(default = "default_tau")]
    pub tau_eo: f64,
    pub mu: f64,
    pub positive_class: usize,
}

fn default_tau() -> f64 {
    0.05
}

impl FairPenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return Err(Error::Domain(format!("penalty weight {} must be non-negative", self.mu)));
        }
        for (name, tau) in [("tau_sp", self.tau_sp), ("tau_eo", self.tau_eo)] {
            if !(0.0..=1.0).contains(&tau) {
                return Err(Error::Domain(format!("{name} = {tau} not in [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedLoss {
    pub value: f64,
    pub penalty: f64,
    pub soft_sp: f64,
    pub soft_eo: f64,
    /// Set when fewer than two groups are present, so the penalty is vacuous.
    pub single_group: bool,
}

/// Largest gap between group means and the groups realizing it.
fn mean_gap(values: &[f64], groups: &[GroupId], mask: impl Fn(usize) -> bool) -> Option<(f64, GroupId, GroupId, BTreeMap<GroupId, usize>)> {
    let mut sums: BTreeMap<GroupId, (f64, usize)> = BTreeMap::new();
    for (i, (&v, &g)) in values.iter().zip(groups).enumerate() {
        if mask(i) {
            let e = sums.entry(g).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    if sums.len() < 2 {
        return None;
    }
    let means: Vec<(GroupId, f64)> = sums.iter().map(|(&g, &(s, n))| (g, s / n as f64)).collect();
    let (mut hi, mut lo) = (means[0], means[0]);
    for &m in &means[1..] {
        if m.1 > hi.1 {
            hi = m;
        }
        if m.1 < lo.1 {
            lo = m;
        }
    }
    let counts = sums.into_iter().map(|(g, (_, n))| (g, n)).collect();
    Some((hi.1 - lo.1, hi.0, lo.0, counts))
}

fn check_lengths(probs: &[f64], groups: &[GroupId], labels: &[usize]) -> Result<()> {
    if groups.len() != probs.len() {
        return Err(Error::dim("penalty groups", probs.len(), groups.len()));
    }
    if labels.len() != probs.len() {
        return Err(Error::dim("penalty labels", probs.len(), labels.len()));
    }
    Ok(())
}

/// `base + mu * (max(0, soft_sp - tau_sp) + max(0, soft_eo - tau_eo))`, where the
/// soft gaps are max-pairwise differences of group-mean positive-class probabilities
/// (over all samples for SP, over positive-label samples for EO).
pub fn loss_fair_penalized(
    base: f64,
    batch_probs: &[f64],
    groups: &[GroupId],
    labels: &[usize],
    cfg: &FairPenaltyConfig,
) -> Result<PenalizedLoss> {
    check_lengths(batch_probs, groups, labels)?;
    let sp = mean_gap(batch_probs, groups, |_| true);
    let eo = mean_gap(batch_probs, groups, |i| labels[i] == cfg.positive_class);
    let soft_sp = sp.as_ref().map_or(0.0, |g| g.0);
    let soft_eo = eo.as_ref().map_or(0.0, |g| g.0);
    let penalty = if cfg.mu == 0.0 {
        0.0
    } else {
        cfg.mu * ((soft_sp - cfg.tau_sp).max(0.0) + (soft_eo - cfg.tau_eo).max(0.0))
    };
    Ok(PenalizedLoss {
        value: if penalty == 0.0 { base } else { base + penalty },
        penalty,
        soft_sp,
        soft_eo,
        single_group: sp.is_none(),
    })
}

/// Gradient of the penalty term of [`loss_fair_penalized`] with respect to each
/// sample's positive-class probability.
pub fn penalty_grad(batch_probs: &[f64], groups: &[GroupId], labels: &[usize], cfg: &FairPenaltyConfig) -> Result<Vec<f64>> {
    check_lengths(batch_probs, groups, labels)?;
    let mut grad = vec![0.0; batch_probs.len()];
    if cfg.mu == 0.0 {
        return Ok(grad);
    }
    let mut add = |gap: Option<(f64, GroupId, GroupId, BTreeMap<GroupId, usize>)>, tau: f64, mask: &dyn Fn(usize) -> bool| {
        if let Some((value, hi, lo, counts)) = gap {
            if value > tau {
                for (i, &g) in groups.iter().enumerate() {
                    if !mask(i) {
                        continue;
                    }
                    if g == hi {
                        grad[i] += cfg.mu / counts[&hi] as f64;
                    } else if g == lo {
                        grad[i] -= cfg.mu / counts[&lo] as f64;
                    }
                }
            }
        }
    };
    add(mean_gap(batch_probs, groups, |_| true), cfg.tau_sp, &|_| true);
    let positive = |i: usize| labels[i] == cfg.positive_class;
    add(mean_gap(batch_probs, groups, positive), cfg.tau_eo, &positive);
    Ok(grad)
}
