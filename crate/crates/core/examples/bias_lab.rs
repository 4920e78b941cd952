//! Generate a shortcut dataset, then look at it through the grayscale and
//! data-cleaning lenses.

use spikefair::bias::{clean_filter, color_stats, gen_synthetic, grayscale_dataset, BiasSpec, CleanThresholds, Geometry};
use spikefair::fairness::GroupId;

fn main() -> spikefair::Result<()> {
    let spec = BiasSpec {
        group_proportions: vec![0.8, 0.2],
        spurious_strength: 0.95,
        cue_channel: 0,
        cue_class: 1,
        cue_groups: Some(vec![0]),
        label_balance: None,
        noise_std: 0.1,
        seed: 7,
    };
    let data = gen_synthetic(&spec, 1000, &Geometry::default())?;
    for g in data.roster() {
        let members: Vec<_> = data.samples().iter().filter(|s| s.group == g).collect();
        let red = |cls: usize| {
            let xs: Vec<f64> = members
                .iter()
                .filter(|s| s.label == cls)
                .map(|s| s.features.chunks(3).map(|p| p[0] - p[1]).sum::<f64>() / 36.0)
                .collect();
            xs.iter().sum::<f64>() / xs.len() as f64
        };
        println!(
            "group {g}: {} samples, mean red-green shift class 0 {:+.3}, class 1 {:+.3}",
            members.len(),
            red(0),
            red(1)
        );
    }

    let gray = grayscale_dataset(&data)?;
    let (spread, sat) = color_stats(&gray.samples()[0].features);
    println!("grayscale sample 0: channel spread {spread:.2e}, saturation {sat:.2e}");

    let cleaned = clean_filter(&data, &CleanThresholds::default())?;
    println!("clean: kept {}, removed {}", cleaned.kept.len(), cleaned.removed.len());
    let cleaned_gray = clean_filter(&gray, &CleanThresholds::default())?;
    println!("clean after grayscale: kept {}", cleaned_gray.kept.len());
    let minority = cleaned.kept.samples().iter().filter(|s| s.group == GroupId(1)).count();
    println!("minority samples surviving clean: {minority}");
    Ok(())
}
