//! Train a small spiking network with TET loss and watch per-group holdout
//! accuracy, with and without the fairness penalty.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spikefair::bias::{gen_synthetic, BiasSpec, Geometry};
use spikefair::snn::{cosine_lr, train_epoch, FairPenaltyConfig, Hyper, LifConfig, Model, Sgd};

fn spec(seed: u64) -> BiasSpec {
    BiasSpec {
        group_proportions: vec![0.8, 0.2],
        spurious_strength: 0.95,
        cue_channel: 0,
        cue_class: 1,
        cue_groups: Some(vec![0]),
        label_balance: None,
        noise_std: 0.1,
        seed,
    }
}

fn main() -> spikefair::Result<()> {
    let geometry = Geometry::default();
    let train = gen_synthetic(&spec(1), 1000, &geometry)?;
    let test = gen_synthetic(&spec(2), 1000, &geometry)?;

    for fairness in [None, Some(FairPenaltyConfig { tau_sp: 0.05, tau_eo: 0.05, mu: 5.0, positive_class: 1 })] {
        let hyper = Hyper { fairness, ..Hyper::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut model = Model::new(&[train.feature_len(), 32, 2], LifConfig::default(), &mut rng)?;
        let mut opt = Sgd::new(&model, hyper.momentum);
        let epochs = 10;
        println!("penalty: {}", if hyper.fairness.is_some() { "mu=5" } else { "off" });
        for e in 0..epochs {
            let lr = cosine_lr(hyper.learning_rate, e, epochs);
            let stats = train_epoch(&mut model, &mut opt, &train, &test, &hyper, lr, 4, &mut rng)?;
            let accs: Vec<String> = stats.holdout.acc_by_group.values().map(|a| format!("{:.3}", a.to_f64())).collect();
            println!(
                "  epoch {e}: loss {:.3} penalty {:.3} test {:.3} by group [{}]",
                stats.mean_loss,
                stats.mean_penalty,
                stats.holdout.accuracy.to_f64(),
                accs.join(", ")
            );
        }
    }
    Ok(())
}
