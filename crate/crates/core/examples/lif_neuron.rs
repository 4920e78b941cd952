//! Rate coding and a single LIF layer stepped by hand.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spikefair::snn::{lif_step, rate_encode, LifConfig, LifState, ResetMode};

fn main() -> spikefair::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let train = rate_encode(&[0.1, 0.5, 0.9], 16, &mut rng)?;
    for i in 0..3 {
        let row: String = (0..16).map(|t| if train.get(t, i) == 1 { '|' } else { '.' }).collect();
        println!("p={:.1} {row}", [0.1, 0.5, 0.9][i]);
    }

    for reset in [ResetMode::Zero, ResetMode::Subtract] {
        let cfg = LifConfig { reset, leak: 0.9, ..LifConfig::default() };
        let mut state = LifState::resting(1);
        let mut out = String::new();
        for _ in 0..24 {
            let (s, next) = lif_step(&cfg, &state, &[0.35])?;
            out.push(if s[0] == 1 { '|' } else { '.' });
            state = next;
        }
        println!("{reset:?} reset, constant 0.35 drive: {out}");
    }
    Ok(())
}
