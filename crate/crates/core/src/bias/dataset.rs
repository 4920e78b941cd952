use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::GroupId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Synthetic,
    Ingested,
    Perturbed,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Synthetic => "synthetic",
            Provenance::Ingested => "ingested",
            Provenance::Perturbed => "perturbed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "synthetic" => Some(Provenance::Synthetic),
            "ingested" => Some(Provenance::Ingested),
            "perturbed" => Some(Provenance::Perturbed),
            _ => None,
        }
    }
}

/// Layout of image features, stored height-major with interleaved channels
/// (`[(row * width + col) * channels + c]`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageShape {
    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: usize,
    pub group: GroupId,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
    shape: Option<ImageShape>,
    feature_len: usize,
    classes: usize,
}

impl Dataset {
    /// Validates that every sample has `feature_len` features in `[0, 1]` and a
    /// label below `classes`.
    pub fn new(samples: Vec<LabeledSample>, feature_len: usize, shape: Option<ImageShape>, classes: usize) -> Result<Self> {
        if let Some(s) = shape {
            if s.len() != feature_len {
                return Err(Error::dim("image shape", feature_len, s.len()));
            }
        }
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != feature_len {
                return Err(Error::dim("sample features", feature_len, s.features.len()));
            }
            if let Some(v) = s.features.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Domain(format!("sample {i} has feature {v} outside [0, 1]")));
            }
            if s.label >= classes {
                return Err(Error::Domain(format!(
                    "sample {i} has label {} but only {classes} classes",
                    s.label
                )));
            }
        }
        Ok(Self {
            samples,
            shape,
            feature_len,
            classes,
        })
    }

    pub fn empty(feature_len: usize, shape: Option<ImageShape>, classes: usize) -> Self {
        Self {
            samples: Vec::new(),
            shape,
            feature_len,
            classes,
        }
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn shape(&self) -> Option<ImageShape> {
        self.shape
    }

    pub fn feature_len(&self) -> usize {
        self.feature_len
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn groups(&self) -> Vec<GroupId> {
        self.samples.iter().map(|s| s.group).collect()
    }

    /// Distinct group ids in ascending order.
    pub fn roster(&self) -> Vec<GroupId> {
        let mut g = self.groups();
        g.sort_unstable();
        g.dedup();
        g
    }

    /// Samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            ..self.empty_like()
        }
    }

    pub fn filter(&self, keep: impl Fn(&LabeledSample) -> bool) -> Self {
        Self {
            samples: self.samples.iter().filter(|s| keep(s)).cloned().collect(),
            ..self.empty_like()
        }
    }

    fn empty_like(&self) -> Self {
        Self::empty(self.feature_len, self.shape, self.classes)
    }

    /// Applies `f` to every sample's features, keeping labels and groups.
    pub fn map_features(&self, f: impl Fn(&[f64]) -> Result<Vec<f64>>) -> Result<Self> {
        let samples = self
            .samples
            .iter()
            .map(|s| {
                Ok(LabeledSample {
                    features: f(&s.features)?,
                    label: s.label,
                    group: s.group,
                    provenance: Provenance::Perturbed,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples, self.feature_len, self.shape, self.classes)
    }

    pub(crate) fn require_image(&self) -> Result<ImageShape> {
        match self.shape {
            Some(s) if s.channels == 3 => Ok(s),
            Some(s) => Err(Error::UnsupportedFeature(format!(
                "expected 3-channel images, found {} channels",
                s.channels
            ))),
            None => Err(Error::UnsupportedFeature("dataset features are not images".into())),
        }
    }
}
