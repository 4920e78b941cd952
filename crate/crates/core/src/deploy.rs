//! Inference under deployment constraints: a shorter timestep budget,
//! finite-precision membranes and unreliable spike delivery.
//!
//! Membranes are quantized with a `b`-bit two's-complement grid over
//! `[-2θ, 2θ)`: step `2θ / 2^(b-1)`, levels `k * step` for
//! `k in [-2^(b-1), 2^(b-1) - 1]`. The threshold itself is a level for every
//! `b >= 2`; at `b = 1` the levels are `{-2θ, 0}` and nothing can fire.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bias::Dataset;
use crate::error::{Error, Result};
use crate::fairness::{fairness_reports, FairnessReport, Metric};
use crate::snn::{encode_sample, Evaluation, ForwardHooks, LifConfig, Logits, Model, SpikeMode, SpikeTrain, Trace};

pub const MAX_MEMBRANE_BITS: u32 = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeploymentProfile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Timestep budget T'; must not exceed the training T.
    pub timesteps: usize,
    /// `None` keeps full precision.
    #[serde(default)]
    pub membrane_bits: Option<u32>,
    #[serde(default)]
    pub spike_drop_rate: f64,
    /// Seeds the spike-drop draws.
    #[serde(default)]
    pub seed: u64,
}

impl DeploymentProfile {
    /// No constraint at all for a model trained with `timesteps` steps.
    pub fn identity(timesteps: usize) -> Self {
        Self {
            name: None,
            timesteps,
            membrane_bits: None,
            spike_drop_rate: 0.0,
            seed: 0,
        }
    }

    pub fn violations(&self, train_timesteps: usize) -> Vec<(String, String)> {
        let mut v = Vec::new();
        if self.timesteps == 0 {
            v.push(("timesteps".into(), "must be at least 1".into()));
        } else if self.timesteps > train_timesteps {
            v.push((
                "timesteps".into(),
                format!("{} exceeds the training budget of {train_timesteps}", self.timesteps),
            ));
        }
        if let Some(b) = self.membrane_bits {
            if !(1..=MAX_MEMBRANE_BITS).contains(&b) {
                v.push(("membrane_bits".into(), format!("{b} is not in 1..={MAX_MEMBRANE_BITS}")));
            }
        }
        if !(0.0..1.0).contains(&self.spike_drop_rate) {
            v.push(("spike_drop_rate".into(), format!("{} is not in [0, 1)", self.spike_drop_rate)));
        }
        v
    }

    pub fn validate(&self, train_timesteps: usize) -> Result<()> {
        match self.violations(train_timesteps).into_iter().next() {
            None => Ok(()),
            Some((field, msg)) => Err(Error::Profile(format!("{field}: {msg}"))),
        }
    }

    /// Human-readable label used in tables.
    pub fn label(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        let bits = self.membrane_bits.map_or("full".to_string(), |b| format!("{b}b"));
        format!("T{}-{}-drop{}", self.timesteps, bits, self.spike_drop_rate)
    }
}

/// Snaps `u` to the nearest `bits`-bit level for threshold `threshold`.
pub fn quantize_membrane(u: f64, threshold: f64, bits: u32) -> f64 {
    let half = (1u64 << (bits - 1)) as f64;
    let step = 2.0 * threshold / half;
    (u / step).round().clamp(-half, half - 1.0) * step
}

struct Constraints<'p> {
    profile: &'p DeploymentProfile,
    rng: ChaCha8Rng,
}

impl ForwardHooks for Constraints<'_> {
    fn membrane(&mut self, cfg: &LifConfig, u: f64) -> f64 {
        match self.profile.membrane_bits {
            Some(b) => quantize_membrane(u, cfg.threshold, b),
            None => u,
        }
    }

    fn deliver(&mut self) -> bool {
        // No draw at rate 0, so the identity profile consumes no randomness.
        self.profile.spike_drop_rate == 0.0 || self.rng.random::<f64>() >= self.profile.spike_drop_rate
    }
}

/// A model bound to a validated profile. Inference only.
#[derive(Debug, Clone)]
pub struct ConstrainedModel<'m> {
    model: &'m Model,
    profile: DeploymentProfile,
    train_timesteps: usize,
}

pub fn apply_profile<'m>(
    model: &'m Model,
    profile: &DeploymentProfile,
    train_timesteps: usize,
) -> Result<ConstrainedModel<'m>> {
    profile.validate(train_timesteps)?;
    Ok(ConstrainedModel {
        model,
        profile: profile.clone(),
        train_timesteps,
    })
}

impl ConstrainedModel<'_> {
    pub fn profile(&self) -> &DeploymentProfile {
        &self.profile
    }

    fn hooks(&self, stream: u64) -> Constraints<'_> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.profile.seed);
        rng.set_stream(stream);
        Constraints {
            profile: &self.profile,
            rng,
        }
    }

    fn run(&self, input: &SpikeTrain, stream: u64, trace: Option<&mut Trace>) -> Result<Logits> {
        if input.width() != self.model.input_width() {
            return Err(Error::dim("model input", self.model.input_width(), input.width()));
        }
        let steps = self.profile.timesteps.min(input.timesteps());
        let input = input.truncate(steps)?;
        Ok(self.model.run(&input, SpikeMode::Hard, &mut self.hooks(stream), trace))
    }

    /// Forward pass on an encoded input (truncated to T'). `stream` selects
    /// the spike-drop substream, normally the sample index.
    pub fn forward(&self, input: &SpikeTrain, stream: u64) -> Result<Logits> {
        self.run(input, stream, None)
    }

    /// Number of spikes emitted by hidden units.
    pub fn hidden_spike_count(&self, input: &SpikeTrain, stream: u64) -> Result<usize> {
        let mut trace = Trace::default();
        self.run(input, stream, Some(&mut trace))?;
        Ok((0..self.model.hidden.len())
            .map(|l| trace.hidden_spikes(l).iter().filter(|&&s| s != 0.0).count())
            .sum())
    }

    /// Encodes every sample exactly as the unconstrained evaluation does
    /// (T steps from `seed`), keeps the first T', and predicts.
    pub fn evaluate(&self, data: &Dataset, seed: u64) -> Result<Evaluation> {
        let predictions = data
            .samples()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let full = encode_sample(&s.features, self.train_timesteps, seed, i)?;
                Ok(self.forward(&full, i as u64)?.predict())
            })
            .collect::<Result<Vec<_>>>()?;
        Evaluation::from_predictions(data, predictions)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationRow {
    pub profile: DeploymentProfile,
    pub accuracy: f64,
    /// One report per positive-class orientation.
    pub fairness: Vec<FairnessReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationTable {
    pub rows: Vec<DegradationRow>,
}

/// Evaluation settings shared by every profile.
#[derive(Debug, Clone, Copy)]
pub struct EvalSpec<'a> {
    pub train_timesteps: usize,
    pub seed: u64,
    pub positive_class: Option<usize>,
    pub metrics: &'a [Metric],
}

/// One row per profile, in the order given. Errors carry the profile index.
pub fn degradation_report(
    model: &Model,
    data: &Dataset,
    profiles: &[DeploymentProfile],
    eval: &EvalSpec<'_>,
) -> Result<DegradationTable> {
    let rows = profiles
        .iter()
        .enumerate()
        .map(|(index, p)| {
            let row = || -> Result<DegradationRow> {
                let ev = apply_profile(model, p, eval.train_timesteps)?.evaluate(data, eval.seed)?;
                Ok(DegradationRow {
                    profile: p.clone(),
                    accuracy: ev.accuracy.to_f64(),
                    fairness: fairness_reports(
                        &ev.predictions,
                        &data.labels(),
                        &data.groups(),
                        data.classes(),
                        eval.positive_class,
                        eval.metrics,
                    )?,
                })
            };
            row().map_err(|e| Error::AtProfile {
                index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DegradationTable { rows })
}

impl DegradationTable {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Flattened: profile columns, accuracy, then the fairness columns; one
    /// line per profile and orientation.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let Some(first) = self.rows.iter().flat_map(|r| r.fairness.first()).next() else {
            w.flush()?;
            return Ok(());
        };
        let mut header: Vec<String> = [
            "profile_index",
            "profile",
            "timesteps",
            "membrane_bits",
            "spike_drop_rate",
            "profile_seed",
            "accuracy",
        ]
        .map(String::from)
        .to_vec();
        header.extend(first.csv_header());
        w.write_record(&header)?;
        for (i, row) in self.rows.iter().enumerate() {
            let p = &row.profile;
            for rep in &row.fairness {
                let mut rec = vec![
                    i.to_string(),
                    p.label(),
                    p.timesteps.to_string(),
                    p.membrane_bits.map(|b| b.to_string()).unwrap_or_default(),
                    p.spike_drop_rate.to_string(),
                    p.seed.to_string(),
                    row.accuracy.to_string(),
                ];
                rec.extend(rep.csv_fields());
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bias::{gen_synthetic, BiasSpec, Geometry};
    use crate::fairness::ALL_METRICS;
    use crate::snn::{evaluate, rate_encode, Dense, ResetMode, SpikingLayer};

    fn one_unit(weight: f64) -> Model {
        Model {
            hidden: vec![SpikingLayer {
                dense: Dense {
                    inputs: 1,
                    outputs: 1,
                    weights: vec![weight],
                    bias: vec![0.0],
                },
                lif: LifConfig {
                    leak: 0.5,
                    threshold: 1.0,
                    reset: ResetMode::Zero,
                    surrogate_slope: 4.0,
                },
            }],
            readout: Dense {
                inputs: 1,
                outputs: 1,
                weights: vec![1.0],
                bias: vec![0.0],
            },
        }
    }

    fn bits(b: u32) -> DeploymentProfile {
        DeploymentProfile {
            membrane_bits: Some(b),
            ..DeploymentProfile::identity(4)
        }
    }

    fn always_on() -> SpikeTrain {
        SpikeTrain::from_rows(&vec![vec![1]; 4]).unwrap()
    }

    #[test]
    fn quantizer_levels() {
        assert_eq!(quantize_membrane(0.8, 1.0, 1), 0.0);
        assert_eq!(quantize_membrane(5.0, 1.0, 1), 0.0);
        assert_eq!(quantize_membrane(-5.0, 1.0, 1), -2.0);
        assert_eq!(quantize_membrane(0.6, 1.0, 2), 1.0);
        assert_eq!(quantize_membrane(1.7, 1.0, 2), 1.0);
        assert_eq!(quantize_membrane(0.6, 1.0, 3), 0.5);
        for b in 2..8 {
            assert_eq!(quantize_membrane(1.0, 1.0, b), 1.0, "threshold representable at {b} bits");
        }
    }

    #[test]
    fn quantizer_is_idempotent() {
        for b in 1..12 {
            for i in -300..300 {
                let q = quantize_membrane(i as f64 * 0.0137, 0.8, b);
                assert_eq!(quantize_membrane(q, 0.8, b), q);
            }
        }
    }

    #[test]
    fn one_bit_hand_example() {
        // 0.8 -> level 0 every step: the unit can never reach threshold.
        let model = one_unit(0.8);
        let c = apply_profile(&model, &bits(1), 4).unwrap();
        assert_eq!(c.forward(&always_on(), 0).unwrap().data, vec![0.0; 4]);
        assert_eq!(model.forward(&always_on()).unwrap().data, vec![0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn two_and_three_bit_hand_examples() {
        let model = one_unit(0.6);
        // 2 bits, step 1: 0.6 -> 1.0, fires and resets every step.
        let c = apply_profile(&model, &bits(2), 4).unwrap();
        assert_eq!(c.forward(&always_on(), 0).unwrap().data, vec![1.0; 4]);
        // 3 bits, step 0.5: 0.6 -> 0.5; 0.25 + 0.6 -> 1.0 fires; reset; repeat.
        let c = apply_profile(&model, &bits(3), 4).unwrap();
        assert_eq!(c.forward(&always_on(), 0).unwrap().data, vec![0.0, 1.0, 0.0, 1.0]);
        // Unconstrained: 0.6, 0.9, 1.05 fires, 0.6.
        assert_eq!(model.forward(&always_on()).unwrap().data, vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn identity_profile_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = Model::new(&[12, 10, 3], LifConfig::default(), &mut rng).unwrap();
        let c = apply_profile(&model, &DeploymentProfile::identity(4), 4).unwrap();
        for i in 0..100 {
            let x: Vec<f64> = (0..12).map(|_| rng.random()).collect();
            let input = rate_encode(&x, 4, &mut rng).unwrap();
            assert_eq!(c.forward(&input, i).unwrap(), model.forward(&input).unwrap());
        }
    }

    #[test]
    fn truncation_keeps_prefix() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = Model::new(&[6, 5, 2], LifConfig::default(), &mut rng).unwrap();
        let input = rate_encode(&[0.5; 6], 4, &mut rng).unwrap();
        let p = DeploymentProfile {
            timesteps: 2,
            ..DeploymentProfile::identity(4)
        };
        let c = apply_profile(&model, &p, 4).unwrap();
        let short = c.forward(&input, 0).unwrap();
        let full = model.forward(&input).unwrap();
        assert_eq!(short.timesteps, 2);
        assert_eq!(short.data[..], full.data[..4]);
    }

    #[test]
    fn near_total_drop_gives_zero_input_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut model = Model::new(&[20, 16, 3], LifConfig::default(), &mut rng).unwrap();
        for d in model.layers_mut() {
            d.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        let p = DeploymentProfile {
            spike_drop_rate: 0.999_999,
            ..DeploymentProfile::identity(4)
        };
        let c = apply_profile(&model, &p, 4).unwrap();
        let zero = model.forward(&SpikeTrain::zeros(4, 20).unwrap()).unwrap();
        let input = rate_encode(&[0.9; 20], 4, &mut rng).unwrap();
        assert_eq!(c.hidden_spike_count(&input, 0).unwrap(), 0);
        assert_eq!(c.forward(&input, 0).unwrap(), zero);
    }

    #[test]
    fn spike_count_non_increasing_in_drop_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = Model::new(&[16, 24, 2], LifConfig::default(), &mut rng).unwrap();
        let input = rate_encode(&[0.7; 16], 4, &mut rng).unwrap();
        let mut last = f64::INFINITY;
        for rate in [0.0, 0.1, 0.3, 0.5, 0.7, 0.9] {
            let p = DeploymentProfile {
                spike_drop_rate: rate,
                ..DeploymentProfile::identity(4)
            };
            let c = apply_profile(&model, &p, 4).unwrap();
            let mean = (0..1000u64)
                .map(|s| c.hidden_spike_count(&input, s).unwrap() as f64)
                .sum::<f64>()
                / 1000.0;
            assert!(mean <= last * 1.02 + 0.05, "rate {rate}: {mean} > {last}");
            last = mean;
        }
        assert!(last < 1.0);
    }

    #[test]
    fn profile_validation() {
        let p = DeploymentProfile {
            timesteps: 5,
            ..DeploymentProfile::identity(4)
        };
        assert!(matches!(p.validate(4), Err(Error::Profile(_))));
        let p = DeploymentProfile {
            spike_drop_rate: 1.0,
            ..DeploymentProfile::identity(4)
        };
        assert!(p.validate(4).is_err());
        assert!(bits(0).validate(4).is_err());
    }

    fn small_task() -> (Model, Dataset) {
        let spec = BiasSpec {
            group_proportions: vec![0.5, 0.5],
            spurious_strength: 0.9,
            cue_channel: 0,
            cue_class: 1,
            cue_groups: None,
            label_balance: None,
            noise_std: 0.1,
            seed: 3,
        };
        let data = gen_synthetic(&spec, 60, &Geometry::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = Model::new(&[108, 8, 2], LifConfig::default(), &mut rng).unwrap();
        (model, data)
    }

    #[test]
    fn identity_row_equals_unconstrained_evaluation() {
        let (model, data) = small_task();
        let eval = EvalSpec {
            train_timesteps: 4,
            seed: 9,
            positive_class: Some(1),
            metrics: &ALL_METRICS,
        };
        let id = DeploymentProfile::identity(4);
        let table = degradation_report(&model, &data, &[id.clone(), id], &eval).unwrap();
        let plain = evaluate(&model, &data, 4, 9).unwrap();
        assert_eq!(table.rows[0].accuracy, plain.accuracy.to_f64());
        assert_eq!(table.rows[0], table.rows[1]);
        let mut csv = Vec::new();
        table.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 3);
    }

    #[test]
    fn errors_name_the_profile() {
        let (model, data) = small_task();
        let eval = EvalSpec {
            train_timesteps: 4,
            seed: 9,
            positive_class: Some(1),
            metrics: &ALL_METRICS,
        };
        let bad = DeploymentProfile {
            timesteps: 8,
            ..DeploymentProfile::identity(4)
        };
        let err = degradation_report(&model, &data, &[DeploymentProfile::identity(4), bad], &eval).unwrap_err();
        assert!(matches!(err, Error::AtProfile { index: 1, .. }));
    }
}
