//! Leaky integrate-and-fire dynamics.
//!
//! ```text
//! u'   = leak * u + input
//! s    = 1 if u' >= threshold else 0
//! u''  = 0 (zero reset) | u' - threshold (subtract reset)   where s = 1
//! ```
//!
//! The spike function is a Heaviside step. For backpropagation it is
//! replaced by the derivative of `sigmoid(slope * (u - threshold))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResetMode {
    #[default]
    Zero,
    Subtract,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LifConfig {
    /// Membrane decay per timestep, in [0, 1].
    pub leak: f64,
    pub threshold: f64,
    pub reset: ResetMode,
    /// Steepness of the sigmoid surrogate.
    pub surrogate_slope: f64,
}

impl Default for LifConfig {
    fn default() -> Self {
        Self {
            leak: 0.5,
            threshold: 1.0,
            reset: ResetMode::Zero,
            surrogate_slope: 4.0,
        }
    }
}

impl LifConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.leak) {
            return Err(Error::Domain(format!("leak {} not in [0, 1]", self.leak)));
        }
        if !(self.threshold > 0.0) || !self.threshold.is_finite() {
            return Err(Error::Domain(format!("threshold {} must be positive", self.threshold)));
        }
        if !(self.surrogate_slope > 0.0) || !self.surrogate_slope.is_finite() {
            return Err(Error::Domain(format!(
                "surrogate slope {} must be positive",
                self.surrogate_slope
            )));
        }
        Ok(())
    }

    /// Smooth spike surrogate `sigmoid(slope * (u - threshold))`.
    pub fn soft_spike(&self, u: f64) -> f64 {
        sigmoid(self.surrogate_slope * (u - self.threshold))
    }

    /// Membrane value after a (possibly fractional) spike `s` fired from `u`.
    pub(crate) fn reset_value(&self, u: f64, s: f64) -> f64 {
        match self.reset {
            ResetMode::Zero => u * (1.0 - s),
            ResetMode::Subtract => u - self.threshold * s,
        }
    }

    /// Total derivative of the post-reset membrane with respect to the
    /// pre-reset membrane, given the spike value and its surrogate slope.
    pub(crate) fn reset_derivative(&self, u: f64, s: f64, ds: f64) -> f64 {
        match self.reset {
            ResetMode::Zero => (1.0 - s) - u * ds,
            ResetMode::Subtract => 1.0 - self.threshold * ds,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifState {
    pub membrane: Vec<f64>,
}

impl LifState {
    pub fn resting(units: usize) -> Self {
        Self {
            membrane: vec![0.0; units],
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Advances every unit by one timestep.
pub fn lif_step(cfg: &LifConfig, state: &LifState, input: &[f64]) -> Result<(Vec<u8>, LifState)> {
    if state.membrane.len() != input.len() {
        return Err(Error::dim("lif_step input", state.membrane.len(), input.len()));
    }
    let mut spikes = vec![0u8; input.len()];
    let membrane = state
        .membrane
        .iter()
        .zip(input)
        .zip(spikes.iter_mut())
        .map(|((&u, &i), s)| {
            let u = cfg.leak * u + i;
            if u >= cfg.threshold {
                *s = 1;
                cfg.reset_value(u, 1.0)
            } else {
                u
            }
        })
        .collect();
    Ok((spikes, LifState { membrane }))
}

/// Derivative of the sigmoid surrogate at membrane value `u`.
pub fn surrogate_grad(u: f64, cfg: &LifConfig) -> f64 {
    let s = cfg.soft_spike(u);
    cfg.surrogate_slope * s * (1.0 - s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_leak() -> LifConfig {
        LifConfig {
            leak: 0.5,
            threshold: 1.0,
            reset: ResetMode::Zero,
            surrogate_slope: 4.0,
        }
    }

    #[test]
    fn quiescent_unit_stays_silent() {
        let (s, st) = lif_step(&half_leak(), &LifState::resting(1), &[0.0]).unwrap();
        assert_eq!(s, vec![0]);
        assert_eq!(st.membrane, vec![0.0]);
    }

    #[test]
    fn sub_threshold_accumulation() {
        let cfg = half_leak();
        let (s1, st) = lif_step(&cfg, &LifState::resting(1), &[0.6]).unwrap();
        assert_eq!((s1[0], st.membrane[0]), (0, 0.6));
        let (s2, st) = lif_step(&cfg, &st, &[0.6]).unwrap();
        assert_eq!(s2[0], 0);
        assert!((st.membrane[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn crossing_fires_and_resets() {
        let cfg = half_leak();
        let (s1, st) = lif_step(&cfg, &LifState::resting(1), &[0.8]).unwrap();
        assert_eq!((s1[0], st.membrane[0]), (0, 0.8));
        let (s2, st) = lif_step(&cfg, &st, &[0.8]).unwrap();
        assert_eq!(s2[0], 1);
        assert_eq!(st.membrane[0], 0.0);
    }

    #[test]
    fn subtract_reset_keeps_residual() {
        let cfg = LifConfig {
            reset: ResetMode::Subtract,
            ..half_leak()
        };
        let (s, st) = lif_step(&cfg, &LifState { membrane: vec![0.8] }, &[0.8]).unwrap();
        assert_eq!(s[0], 1);
        assert!((st.membrane[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch_is_dimension_error() {
        let err = lif_step(&half_leak(), &LifState::resting(2), &[0.1]).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn surrogate_peaks_at_threshold() {
        let cfg = half_leak();
        assert_eq!(surrogate_grad(1.0, &cfg), 1.0);
        assert!(surrogate_grad(1e6, &cfg) < 1e-12);
        for delta in [0.01, 0.3, 1.7, 5.0] {
            let hi = surrogate_grad(1.0 + delta, &cfg);
            let lo = surrogate_grad(1.0 - delta, &cfg);
            assert!((hi - lo).abs() < 1e-15, "asymmetric at {delta}");
            assert!(hi > 0.0 && hi < 1.0);
        }
    }

    #[test]
    fn config_validation() {
        assert!(half_leak().validate().is_ok());
        assert!(LifConfig { leak: 1.2, ..half_leak() }.validate().is_err());
        assert!(LifConfig { threshold: 0.0, ..half_leak() }.validate().is_err());
        assert!(LifConfig { surrogate_slope: -1.0, ..half_leak() }.validate().is_err());
    }
}
