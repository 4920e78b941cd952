use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::perturb::rgb_to_hsv;
use crate::error::{Error, Result};

/// Removal criteria for black-and-white and abnormally colored images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CleanThresholds {
    /// An image whose mean per-pixel `max - min` channel spread is below this is gray.
    pub max_channel_spread_for_gray: f64,
    /// Inclusive band of acceptable mean HSV saturation.
    pub saturation_band: [f64; 2],
}

impl Default for CleanThresholds {
    fn default() -> Self {
        Self {
            max_channel_spread_for_gray: 0.02,
            saturation_band: [0.05, 0.85],
        }
    }
}

impl CleanThresholds {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.saturation_band;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(Error::Domain(format!("saturation band [{lo}, {hi}] is not a sub-interval of [0, 1]")));
        }
        if !(self.max_channel_spread_for_gray >= 0.0) {
            return Err(Error::Domain("gray spread threshold must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CleanReason {
    Kept,
    Grayscale,
    AbnormalColor,
}

#[derive(Debug, Clone)]
pub struct CleanOutcome {
    pub kept: Dataset,
    pub removed: Dataset,
    /// One entry per input sample, in input order.
    pub reasons: Vec<CleanReason>,
}

/// Mean channel spread and mean HSV saturation of an interleaved RGB image.
pub fn color_stats(image: &[f64]) -> (f64, f64) {
    let n = (image.len() / 3).max(1) as f64;
    let (spread, sat) = image.chunks_exact(3).fold((0.0, 0.0), |(sp, sa), px| {
        let max = px[0].max(px[1]).max(px[2]);
        let min = px[0].min(px[1]).min(px[2]);
        (sp + (max - min), sa + rgb_to_hsv(px).1)
    });
    (spread / n, sat / n)
}

pub fn classify(image: &[f64], th: &CleanThresholds) -> CleanReason {
    let (spread, sat) = color_stats(image);
    if spread < th.max_channel_spread_for_gray {
        CleanReason::Grayscale
    } else if sat < th.saturation_band[0] || sat > th.saturation_band[1] {
        CleanReason::AbnormalColor
    } else {
        CleanReason::Kept
    }
}

/// Partitions `data` into kept and removed samples. Samples are not modified.
pub fn clean_filter(data: &Dataset, thresholds: &CleanThresholds) -> Result<CleanOutcome> {
    data.require_image()?;
    thresholds.validate()?;
    let reasons: Vec<CleanReason> = data
        .samples()
        .iter()
        .map(|s| classify(&s.features, thresholds))
        .collect();
    let (mut keep, mut drop) = (Vec::new(), Vec::new());
    for (i, r) in reasons.iter().enumerate() {
        if *r == CleanReason::Kept {
            keep.push(i);
        } else {
            drop.push(i);
        }
    }
    Ok(CleanOutcome {
        kept: data.subset(&keep),
        removed: data.subset(&drop),
        reasons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bias::dataset::{ImageShape, LabeledSample, Provenance};
    use crate::fairness::GroupId;

    fn dataset(images: Vec<Vec<f64>>) -> Dataset {
        let shape = ImageShape {
            height: 1,
            width: images[0].len() / 3,
            channels: 3,
        };
        let samples = images
            .into_iter()
            .map(|features| LabeledSample {
                features,
                label: 0,
                group: GroupId(0),
                provenance: Provenance::Synthetic,
            })
            .collect();
        Dataset::new(samples, shape.len(), Some(shape), 1).unwrap()
    }

    #[test]
    fn gray_image_removed_as_grayscale() {
        let out = clean_filter(&dataset(vec![vec![0.4, 0.4, 0.4, 0.8, 0.8, 0.8]]), &CleanThresholds::default()).unwrap();
        assert_eq!(out.reasons, vec![CleanReason::Grayscale]);
        assert_eq!(out.removed.len(), 1);
    }

    #[test]
    fn vacuous_thresholds_keep_everything() {
        let th = CleanThresholds {
            max_channel_spread_for_gray: 0.0,
            saturation_band: [0.0, 1.0],
        };
        let data = dataset(vec![vec![0.4; 6], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]]);
        let out = clean_filter(&data, &th).unwrap();
        assert_eq!(out.kept.len(), 2);
        assert!(out.removed.is_empty());
    }

    #[test]
    fn saturated_image_is_abnormal() {
        let th = CleanThresholds {
            max_channel_spread_for_gray: 0.02,
            saturation_band: [0.05, 0.8],
        };
        let out = clean_filter(&dataset(vec![vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0]]), &th).unwrap();
        assert_eq!(out.reasons, vec![CleanReason::AbnormalColor]);
    }

    #[test]
    fn non_images_unsupported() {
        let samples = vec![LabeledSample {
            features: vec![0.1, 0.2],
            label: 0,
            group: GroupId(0),
            provenance: Provenance::Synthetic,
        }];
        let data = Dataset::new(samples, 2, None, 1).unwrap();
        assert!(matches!(
            clean_filter(&data, &CleanThresholds::default()),
            Err(Error::UnsupportedFeature(_))
        ));
    }
}
