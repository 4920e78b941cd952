//! Color perturbations on interleaved RGB images with values in `[0, 1]`.

use super::dataset::ImageShape;
use crate::error::{Error, Result};

pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

fn check_rgb(image: &[f64], shape: ImageShape) -> Result<()> {
    if shape.channels != 3 {
        return Err(Error::dim("image channels", 3, shape.channels));
    }
    if image.len() != shape.len() {
        return Err(Error::dim("image length", shape.len(), image.len()));
    }
    Ok(())
}

/// Luma of one pixel. Already-gray pixels map to themselves exactly.
pub fn luma(px: &[f64]) -> f64 {
    if px[0] == px[1] && px[1] == px[2] {
        return px[0];
    }
    (LUMA[0] * px[0] + LUMA[1] * px[1] + LUMA[2] * px[2]).clamp(0.0, 1.0)
}

/// Replaces every channel with the pixel's luma. Idempotent.
pub fn to_grayscale(image: &[f64], shape: ImageShape) -> Result<Vec<f64>> {
    check_rgb(image, shape)?;
    Ok(image
        .chunks_exact(3)
        .flat_map(|px| {
            let y = luma(px);
            [y, y, y]
        })
        .collect())
}

/// RGB to `(hue in degrees [0, 360), saturation, value)`.
pub fn rgb_to_hsv(px: &[f64]) -> (f64, f64, f64) {
    let (r, g, b) = (px[0], px[1], px[2]);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let chroma = max - min;
    let hue = if chroma == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / chroma).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / chroma + 2.0)
    } else {
        60.0 * ((r - g) / chroma + 4.0)
    };
    let sat = if max == 0.0 { 0.0 } else { chroma / max };
    (hue, sat, max)
}

pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let c = v * s;
    let hp = h.rem_euclid(360.0) / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [(r + m).clamp(0.0, 1.0), (g + m).clamp(0.0, 1.0), (b + m).clamp(0.0, 1.0)]
}

/// Rotates hue by `hue_delta` degrees and scales saturation (clamped to `[0, 1]`).
pub fn color_shift(image: &[f64], shape: ImageShape, hue_delta: f64, saturation_scale: f64) -> Result<Vec<f64>> {
    check_rgb(image, shape)?;
    if !(saturation_scale >= 0.0) || !saturation_scale.is_finite() {
        return Err(Error::Domain(format!(
            "saturation scale {saturation_scale} must be non-negative"
        )));
    }
    if !hue_delta.is_finite() {
        return Err(Error::Domain("hue delta must be finite".into()));
    }
    Ok(image
        .chunks_exact(3)
        .flat_map(|px| {
            let (h, s, v) = rgb_to_hsv(px);
            hsv_to_rgb((h + hue_delta).rem_euclid(360.0), (s * saturation_scale).clamp(0.0, 1.0), v)
        })
        .collect())
}
