use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spikefair::bias::{Dataset, LabeledSample, Provenance};
use spikefair::fairness::GroupId;
use spikefair::snn::{
    batch_objective, cosine_lr, evaluate, loss_fair_penalized, loss_task, rate_encode, train_epoch, Example,
    FairPenaltyConfig, Hyper, LifConfig, Logits, LossMode, Model, ResetMode, Sgd, SpikeMode,
};

/// Two classes lighting up disjoint halves of the input.
fn separable(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|i| {
            let label = i % 2;
            let features = (0..8)
                .map(|j| {
                    let on = (j < 4) == (label == 0);
                    if on { rng.random_range(0.7..1.0) } else { rng.random_range(0.0..0.2) }
                })
                .collect();
            LabeledSample {
                features,
                label,
                group: GroupId((i % 3 == 0) as u32),
                provenance: Provenance::Synthetic,
            }
        })
        .collect();
    Dataset::new(samples, 8, None, 2).unwrap()
}

fn train(data: &Dataset, hyper: &Hyper, epochs: usize, seed: u64) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Model::new(&[8, 16, 2], LifConfig::default(), &mut rng).unwrap();
    let mut opt = Sgd::new(&model, hyper.momentum);
    for e in 0..epochs {
        let lr = cosine_lr(hyper.learning_rate, e, epochs);
        train_epoch(&mut model, &mut opt, data, data, hyper, lr, 9, &mut rng).unwrap();
    }
    model
}

#[test]
fn separable_set_is_learned() {
    let data = separable(400, 1);
    let model = train(&data, &Hyper::default(), 20, 2);
    let acc = evaluate(&model, &data, 4, 3).unwrap().accuracy.to_f64();
    assert!(acc >= 0.95, "training accuracy {acc}");
}

#[test]
fn zero_learning_rate_is_a_no_op() {
    let data = separable(64, 1);
    let hyper = Hyper {
        learning_rate: 0.0,
        ..Hyper::default()
    };
    let untouched = Model::new(&[8, 16, 2], LifConfig::default(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    assert_eq!(train(&data, &hyper, 3, 5), untouched);
}

#[test]
fn training_is_deterministic() {
    let data = separable(128, 4);
    let hyper = Hyper {
        fairness: Some(FairPenaltyConfig {
            tau_sp: 0.0,
            tau_eo: 0.0,
            mu: 1.0,
            positive_class: 1,
        }),
        ..Hyper::default()
    };
    let a = train(&data, &hyper, 4, 8);
    assert_eq!(a, train(&data, &hyper, 4, 8));
    assert_ne!(a.flat_params(), train(&data, &hyper, 4, 9).flat_params());
}

fn max_relative_error(mode: LossMode, reset: ResetMode, fairness: Option<FairPenaltyConfig>, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lif = LifConfig {
        reset,
        ..LifConfig::default()
    };
    let mut model = Model::new(&[8, 16, 2], lif, &mut rng).unwrap();
    for d in model.layers_mut() {
        d.weights.iter_mut().for_each(|w| *w *= 3.0);
    }
    let batch: Vec<Example> = (0..6)
        .map(|i| Example {
            input: rate_encode(&(0..8).map(|_| rng.random()).collect::<Vec<f64>>(), 4, &mut rng).unwrap(),
            label: i % 2,
            group: GroupId((i % 3 == 0) as u32),
        })
        .collect();
    let f = fairness.as_ref();
    let (_, grads) = batch_objective(&model, &batch, mode, f, SpikeMode::Proxy).unwrap();
    let analytic = grads.flat();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let i = rng.random_range(0..model.param_count());
        let w0 = *model.param_mut(i);
        *model.param_mut(i) = w0 + h;
        let up = batch_objective(&model, &batch, mode, f, SpikeMode::Proxy).unwrap().0.value;
        *model.param_mut(i) = w0 - h;
        let down = batch_objective(&model, &batch, mode, f, SpikeMode::Proxy).unwrap().0.value;
        *model.param_mut(i) = w0;
        let numeric = (up - down) / (2.0 * h);
        let scale = analytic[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[i] - numeric).abs() / scale);
    }
    worst
}

#[test]
fn proxy_gradients_match_finite_differences() {
    let penalty = FairPenaltyConfig {
        tau_sp: 0.0,
        tau_eo: 0.0,
        mu: 2.0,
        positive_class: 1,
    };
    for (mode, reset, fair) in [
        (LossMode::Tet, ResetMode::Zero, None),
        (LossMode::MeanCe, ResetMode::Zero, None),
        (LossMode::Tet, ResetMode::Subtract, None),
        (LossMode::Tet, ResetMode::Zero, Some(penalty)),
    ] {
        let err = max_relative_error(mode, reset, fair, 21);
        assert!(err < 1e-4, "{mode:?} {reset:?} penalty={}: {err:e}", fair.is_some());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hidden_activity_is_binary(seed in any::<u64>(), t in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = Model::new(&[6, 10, 7, 3], LifConfig::default(), &mut rng).unwrap();
        let x: Vec<f64> = (0..6).map(|_| rng.random()).collect();
        let input = rate_encode(&x, t, &mut rng).unwrap();
        for layer in model.hidden_activity(&input).unwrap() {
            prop_assert_eq!(layer.timesteps(), t);
            for step in 0..t {
                prop_assert!(layer.step(step).iter().all(|&s| s <= 1));
            }
        }
    }

    #[test]
    fn single_step_losses_agree(row in prop::collection::vec(-20.0f64..20.0, 2..6), pick in any::<prop::sample::Index>()) {
        let logits = Logits::from_rows(std::slice::from_ref(&row)).unwrap();
        let label = pick.index(row.len());
        prop_assert_eq!(
            loss_task(&logits, label, LossMode::Tet).unwrap(),
            loss_task(&logits, label, LossMode::MeanCe).unwrap()
        );
    }

    #[test]
    fn zero_mu_is_the_task_loss(
        base in 0.0f64..10.0,
        rows in prop::collection::vec((0.0f64..=1.0, 0u32..4, 0usize..2), 1..40),
        tau in 0.0f64..1.0,
    ) {
        let probs: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let groups: Vec<GroupId> = rows.iter().map(|r| GroupId(r.1)).collect();
        let labels: Vec<usize> = rows.iter().map(|r| r.2).collect();
        let cfg = FairPenaltyConfig { tau_sp: tau, tau_eo: tau, mu: 0.0, positive_class: 1 };
        let out = loss_fair_penalized(base, &probs, &groups, &labels, &cfg).unwrap();
        prop_assert_eq!(out.value, base);
    }
}
