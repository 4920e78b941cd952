//! Datasets with controlled bias, color perturbations and cleaning.

mod clean;
mod dataset;
mod io;
mod perturb;
mod synth;

pub use clean::{classify, clean_filter, color_stats, CleanOutcome, CleanReason, CleanThresholds};
pub use dataset::{Dataset, ImageShape, LabeledSample, Provenance};
pub use io::{load_directory_dataset, read_blob, save_directory_dataset, write_blob, MANIFEST_HEADER};
pub use perturb::{color_shift, hsv_to_rgb, luma, rgb_to_hsv, to_grayscale, LUMA};
pub use synth::{gen_synthetic, largest_remainder, BiasSpec, Geometry};

use crate::error::Result;

/// Grayscale every image in `data`.
pub fn grayscale_dataset(data: &Dataset) -> Result<Dataset> {
    let shape = data.require_image()?;
    data.map_features(|x| to_grayscale(x, shape))
}

/// Applies [`color_shift`] to every image in `data`.
pub fn color_shift_dataset(data: &Dataset, hue_delta: f64, saturation_scale: f64) -> Result<Dataset> {
    let shape = data.require_image()?;
    data.map_features(|x| color_shift(x, shape, hue_delta, saturation_scale))
}
