//! Degradation of accuracy and fairness as the trained model is squeezed
//! onto fewer timesteps, fewer membrane bits and a lossy spike fabric.

use spikefair::deploy::{degradation_report, DeploymentProfile, EvalSpec};
use spikefair::fairness::ALL_METRICS;
use spikefair::harness::{bundled, derive_seed, run_pipeline, streams, validate_config};

fn profile(timesteps: usize, membrane_bits: Option<u32>, spike_drop_rate: f64) -> DeploymentProfile {
    DeploymentProfile {
        name: None,
        timesteps,
        membrane_bits,
        spike_drop_rate,
        seed: 11,
    }
}

fn main() {
    let mut cfg = validate_config(bundled::SHORTCUT).expect("bundled config is valid");
    cfg.deployment.profiles.clear();
    let run = run_pipeline(&cfg).expect("run succeeds");

    let profiles = [
        profile(4, None, 0.0),
        profile(2, None, 0.0),
        profile(1, None, 0.0),
        profile(4, Some(4), 0.0),
        profile(4, Some(3), 0.0),
        profile(4, None, 0.2),
        profile(4, None, 0.5),
        profile(2, Some(4), 0.2),
    ];
    let spec = EvalSpec {
        train_timesteps: cfg.model.timesteps,
        seed: derive_seed(cfg.seed, streams::EVAL),
        positive_class: cfg.evaluation.positive_class,
        metrics: &ALL_METRICS,
    };
    let table = degradation_report(&run.model, &run.test, &profiles, &spec).expect("profiles are valid");
    println!("{:<24} {:>8} {:>9} {:>9}", "profile", "acc", "d_acc", "d_sp");
    for row in &table.rows {
        let f = &row.fairness[0];
        println!(
            "{:<24} {:>8.4} {:>9.4} {:>9.4}",
            row.profile.label(),
            row.accuracy,
            f.delta_acc,
            f.delta_sp.unwrap_or(f64::NAN)
        );
    }
}
