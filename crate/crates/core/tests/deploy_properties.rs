use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spikefair::deploy::{apply_profile, quantize_membrane, DeploymentProfile, MAX_MEMBRANE_BITS};
use spikefair::snn::{rate_encode, LifConfig, Model};

proptest! {
    #[test]
    fn quantizer_is_idempotent(u in -10.0f64..10.0, theta in 0.1f64..4.0, bits in 1u32..=MAX_MEMBRANE_BITS) {
        let q = quantize_membrane(u, theta, bits);
        prop_assert_eq!(quantize_membrane(q, theta, bits), q);
    }

    #[test]
    fn quantizer_output_is_on_the_grid(u in -10.0f64..10.0, bits in 1u32..12) {
        let theta = 1.0;
        let q = quantize_membrane(u, theta, bits);
        let half = 2f64.powi(bits as i32 - 1);
        let step = 2.0 * theta / half;
        let k = q / step;
        prop_assert_eq!(k, k.round());
        prop_assert!(k >= -half && k <= half - 1.0);
    }

    #[test]
    fn identity_profile_matches_the_model(seed in any::<u64>(), t in 1usize..6, stream in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = Model::new(&[5, 9, 3], LifConfig::default(), &mut rng).unwrap();
        let x: Vec<f64> = (0..5).map(|_| rng.random()).collect();
        let input = rate_encode(&x, t, &mut rng).unwrap();
        let c = apply_profile(&model, &DeploymentProfile::identity(t), t).unwrap();
        prop_assert_eq!(c.forward(&input, stream).unwrap(), model.forward(&input).unwrap());
    }
}
