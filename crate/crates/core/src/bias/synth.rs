//! Synthetic image datasets with controllable demographic bias.
//!
//! Each image carries two signals:
//!
//! * a class-defining stripe pattern in luminance (equal on all channels), the
//!   robust "geometric" feature;
//! * a color cue: a luma-preserving chroma shift toward `cue_channel`. In the
//!   groups listed in `cue_groups` the cue is on exactly when the label is
//!   `cue_class`, except that with probability `1 - spurious_strength` the
//!   relationship is flipped. Outside those groups the cue is always off.
//!
//! Because the cue does not change luma, converting to grayscale erases it
//! while leaving the stripes intact.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, ImageShape, LabeledSample, Provenance};
use super::perturb::LUMA;
use crate::error::{Error, Result};
use crate::fairness::GroupId;

/// Bias knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasSpec {
    /// Share of each group (index = group id); must sum to 1.
    pub group_proportions: Vec<f64>,
    /// Probability the cue agrees with `cue_class`, in [0, 1].
    pub spurious_strength: f64,
    #[serde(default)]
    pub cue_channel: usize,
    #[serde(default = "default_cue_class")]
    pub cue_class: usize,
    /// Groups carrying the informative cue; `None` means all groups.
    #[serde(default)]
    pub cue_groups: Option<Vec<u32>>,
    /// Per-group class priors; `None` means uniform.
    #[serde(default)]
    pub label_balance: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_noise")]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_cue_class() -> usize {
    1
}

fn default_noise() -> f64 {
    0.1
}

/// Image size and signal strengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Geometry {
    pub height: usize,
    pub width: usize,
    /// Number of classes, 2 to 4 (one stripe orientation each).
    pub classes: usize,
    pub background: f64,
    /// Luminance added on stripe pixels.
    pub contrast: f64,
    /// Shift added to the cue channel when the cue is on.
    pub cue_amplitude: f64,
    /// Randomize the stripe phase per sample.
    pub jitter: bool,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            height: 6,
            width: 6,
            classes: 2,
            background: 0.35,
            contrast: 0.12,
            cue_amplitude: 0.5,
            jitter: false,
        }
    }
}

const PROPORTION_TOL: f64 = 1e-9;

impl BiasSpec {
    /// Every violation found, each prefixed with the offending field name.
    pub fn violations(&self, classes: usize) -> Vec<(String, String)> {
        let mut v = Vec::new();
        let p = &self.group_proportions;
        if p.is_empty() {
            v.push(("group_proportions".into(), "at least one group is required".into()));
        } else if p.iter().any(|x| !(*x >= 0.0)) {
            v.push(("group_proportions".into(), "proportions must be non-negative".into()));
        } else {
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > PROPORTION_TOL {
                v.push(("group_proportions".into(), format!("proportions sum to {sum}, not 1")));
            }
        }
        if !(0.0..=1.0).contains(&self.spurious_strength) {
            v.push((
                "spurious_strength".into(),
                format!("{} is not in [0, 1]", self.spurious_strength),
            ));
        }
        if self.cue_channel >= 3 {
            v.push(("cue_channel".into(), format!("channel {} does not exist", self.cue_channel)));
        }
        if self.cue_class >= classes {
            v.push(("cue_class".into(), format!("class {} >= {classes} classes", self.cue_class)));
        }
        if let Some(groups) = &self.cue_groups {
            if let Some(g) = groups.iter().find(|&&g| g as usize >= p.len()) {
                v.push(("cue_groups".into(), format!("group {g} does not exist")));
            }
        }
        if let Some(balance) = &self.label_balance {
            if balance.len() != p.len() {
                v.push((
                    "label_balance".into(),
                    format!("{} rows for {} groups", balance.len(), p.len()),
                ));
            }
            for (g, row) in balance.iter().enumerate() {
                let sum: f64 = row.iter().sum();
                if row.len() != classes || row.iter().any(|x| !(*x >= 0.0)) || (sum - 1.0).abs() > PROPORTION_TOL {
                    v.push((
                        format!("label_balance[{g}]"),
                        format!("must be {classes} non-negative priors summing to 1"),
                    ));
                }
            }
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            v.push(("noise_std".into(), "must be non-negative".into()));
        }
        v
    }

    pub fn validate(&self, classes: usize) -> Result<()> {
        let v = self.violations(classes);
        if v.is_empty() {
            Ok(())
        } else {
            let msg: Vec<String> = v.into_iter().map(|(f, m)| format!("{f}: {m}")).collect();
            Err(Error::Config(msg.join("; ")))
        }
    }

    fn cue_active(&self, g: u32) -> bool {
        self.cue_groups.as_ref().is_none_or(|gs| gs.contains(&g))
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.classes) {
            return Err(Error::Config(format!("geometry supports 2 to 4 classes, got {}", self.classes)));
        }
        if self.height < 3 || self.width < 3 {
            return Err(Error::Config("images must be at least 3x3".into()));
        }
        for (name, v) in [
            ("background", self.background),
            ("contrast", self.contrast),
            ("cue_amplitude", self.cue_amplitude),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("geometry.{name} = {v} is not in [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> ImageShape {
        ImageShape {
            height: self.height,
            width: self.width,
            channels: 3,
        }
    }

    /// Whether pixel `(r, c)` lies on a stripe of class `k` with phase `phase`.
    fn on_stripe(&self, k: usize, r: usize, c: usize, phase: usize) -> bool {
        let (r, c) = (r + phase, c + phase);
        match k {
            0 => r % 3 == 0,
            1 => c % 3 == 0,
            2 => (r + c) % 3 == 0,
            _ => (r + 2 * c) % 3 == 0,
        }
    }
}

/// Apportions `n` items by `weights` using largest remainders; ties go to the
/// lower index.
pub fn largest_remainder(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Generates `n` samples. Group sizes (and class counts within each group) are
/// exact largest-remainder apportionments; sample `i`'s pixels depend only on
/// the seed and `i`.
pub fn gen_synthetic(spec: &BiasSpec, n: usize, geometry: &Geometry) -> Result<Dataset> {
    geometry.validate()?;
    spec.validate(geometry.classes)?;
    if n == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    let classes = geometry.classes;
    let uniform = vec![1.0 / classes as f64; classes];

    let mut slots: Vec<(u32, usize)> = Vec::with_capacity(n);
    for (g, &size) in largest_remainder(n, &spec.group_proportions).iter().enumerate() {
        let priors = spec.label_balance.as_ref().map_or(&uniform, |b| &b[g]);
        for (label, &count) in largest_remainder(size, priors).iter().enumerate() {
            slots.extend(std::iter::repeat_n((g as u32, label), count));
        }
    }
    let mut order_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    slots.shuffle(&mut order_rng);

    let shape = geometry.shape();
    let samples = slots
        .iter()
        .enumerate()
        .map(|(i, &(g, label))| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64 + 1);
            LabeledSample {
                features: render(spec, geometry, g, label, &mut rng),
                label,
                group: GroupId(g),
                provenance: Provenance::Synthetic,
            }
        })
        .collect();
    Dataset::new(samples, shape.len(), Some(shape), classes)
}

fn render<R: Rng>(spec: &BiasSpec, geo: &Geometry, group: u32, label: usize, rng: &mut R) -> Vec<f64> {
    let cue_on = if spec.cue_active(group) {
        let agrees = rng.random::<f64>() < spec.spurious_strength;
        (label == spec.cue_class) == agrees
    } else {
        false
    };
    let phase = if geo.jitter { rng.random_range(0..3) } else { 0 };
    let noise = Normal::new(0.0, spec.noise_std).expect("validated noise");

    // Luma-neutral shift: +a on the cue channel, compensating -k on the others.
    let mut shift = [0.0; 3];
    if cue_on {
        let w = LUMA[spec.cue_channel];
        let k = geo.cue_amplitude * w / (1.0 - w);
        for (c, s) in shift.iter_mut().enumerate() {
            *s = if c == spec.cue_channel { geo.cue_amplitude } else { -k };
        }
    }

    let mut out = Vec::with_capacity(geo.shape().len());
    for r in 0..geo.height {
        for c in 0..geo.width {
            let lum = geo.background + if geo.on_stripe(label, r, c, phase) { geo.contrast } else { 0.0 };
            for s in shift {
                let v = lum + s + noise.sample(rng);
                out.push(v.clamp(0.0, 1.0));
            }
        }
    }
    out
}
