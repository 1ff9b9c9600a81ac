mod common;

use common::*;
use jamlab_core::data::{Dataset, Provenance};
use jamlab_core::net::{forward, grad_params, init_orthogonal, init_uniform, Activation, NetworkConfig, Params};
use jamlab_core::objective::*;
use jamlab_core::Error;
use proptest::prelude::*;

fn cfg(d: usize, h: usize, l: usize, act: Activation) -> NetworkConfig {
    NetworkConfig::new(d, h, l, act).unwrap()
}

#[test]
fn zero_network_margins_and_loss() {
    let data = sphere(12, 3, 1);
    let p = Params::zeros(cfg(3, 4, 2, Activation::Relu)).unwrap();
    let m = margins(&p, &data).unwrap();
    assert!(m.deltas().iter().all(|&d| d == 1.0));
    assert_eq!(m.n_delta(), 12);
    assert_eq!(hinge_loss(&m), 0.5);
    assert_eq!(test_error(&p, &data).unwrap(), 1.0);
    assert!((cross_entropy_loss(&p, &data).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
}

#[test]
fn margins_agree_with_per_sample_recomputation() {
    let data = sphere(30, 5, 2);
    let p = gaussian_params(cfg(5, 6, 2, Activation::Tanh), 1.0, 3);
    let m = margins(&p, &data).unwrap();
    for i in 0..data.len() {
        let want = 1.0 - data.labels()[i] as f64 * naive_forward(&p, data.input(i));
        assert!((m.deltas()[i] - want).abs() < 1e-13);
    }
}

#[test]
fn exact_margins_give_zero_loss() {
    // A one-unit linear net with f(x) = x, patterns at ±1.
    let p = Params::from_flat(cfg(1, 1, 1, Activation::Linear), vec![1.0, 0.0, 1.0, 0.0]).unwrap();
    let data = Dataset::new(vec![1.0, -1.0], 1, vec![1, -1], Provenance::ImagePca, 0).unwrap();
    let m = margins(&p, &data).unwrap();
    assert_eq!(m.deltas(), &[0.0, 0.0]);
    assert_eq!(m.n_delta(), 0);
    assert_eq!(hinge_loss(&m), 0.0);
    assert!(loss_gradient(&p, &data).unwrap().iter().all(|&g| g == 0.0));
}

#[test]
fn hinge_gradient_matches_finite_differences() {
    let mut checked = 0;
    for s in 0..30u64 {
        let c = cfg(4, 5, 1 + (s % 3) as usize, Activation::Tanh);
        let data = sphere(15, 4, 100 + s);
        let p = gaussian_params(c, 1.0, s);
        let m = margins(&p, &data).unwrap();
        if m.deltas().iter().any(|d| d.abs() < 1e-3) {
            continue;
        }
        let g = loss_gradient(&p, &data).unwrap();
        let fd = fd_gradient(&p, 1e-5, |q| hinge_loss(&margins(q, &data).unwrap()));
        assert!(rel_err(&g, &fd) <= 1e-6, "instance {s}: {}", rel_err(&g, &fd));
        checked += 1;
    }
    assert!(checked >= 20);
}

#[test]
fn single_pattern_gradient_is_scaled_function_gradient() {
    let c = cfg(3, 4, 2, Activation::Tanh);
    let p = gaussian_params(c, 0.3, 4);
    let data = Dataset::new(vec![0.3, -0.1, 0.8], 3, vec![-1], Provenance::RandomSphere, 0).unwrap();
    let delta = margins(&p, &data).unwrap().deltas()[0];
    assert!(delta > 0.0);
    let g = loss_gradient(&p, &data).unwrap();
    let gf = grad_params(&p, data.input(0)).unwrap();
    for (a, b) in g.iter().zip(&gf) {
        assert!((a - delta * 1.0 * b).abs() < 1e-14);
    }
}

#[test]
fn cross_entropy_gradient_matches_finite_differences() {
    let c = cfg(4, 5, 2, Activation::Tanh);
    let data = sphere(20, 4, 7);
    let p = gaussian_params(c, 1.0, 8);
    let g = cross_entropy_gradient(&p, &data).unwrap();
    let fd = fd_gradient(&p, 1e-5, |q| cross_entropy_loss(q, &data).unwrap());
    assert!(rel_err(&g, &fd) <= 1e-6);
}

#[test]
fn cross_entropy_vanishes_for_large_margins() {
    let p = Params::from_flat(cfg(1, 1, 1, Activation::Linear), vec![1.0, 0.0, 1.0, 0.0]).unwrap();
    let data = Dataset::new(vec![800.0], 1, vec![1], Provenance::ImagePca, 0).unwrap();
    assert!(cross_entropy_loss(&p, &data).unwrap() < 1e-300);
}

#[test]
fn random_network_errs_half_the_time() {
    let data = sphere(4000, 5, 11);
    let p = init_uniform(cfg(5, 20, 2, Activation::Relu), 12).unwrap();
    let e = test_error(&p, &data).unwrap();
    let sd = (0.25f64 / 4000.0).sqrt();
    assert!((e - 0.5).abs() < 3.0 * sd + 1e-12, "{e}");
}

#[test]
fn separable_pair_fits_quickly() {
    let data = Dataset::new(vec![1.0, 0.5, -0.7, 0.2], 2, vec![1, -1], Provenance::ImagePca, 0).unwrap();
    let p = init_orthogonal(cfg(2, 8, 1, Activation::Relu), 1).unwrap();
    let s = TrainSchedule::full_batch(Optimizer::Adam, 100_000, 1e-2);
    let t = train(p, &data, &s, None).unwrap();
    assert_eq!(t.stop, StopReason::ZeroLoss);
    assert!(t.steps_run < 100_000);
    assert_eq!(t.last().n_delta, 0);
    assert_eq!(t.last().loss, 0.0);
    for i in 0..2 {
        let f = forward(&t.params, data.input(i)).unwrap().output;
        assert!(data.labels()[i] as f64 * f >= 1.0);
    }
}

#[test]
fn schedule_validation() {
    let data = sphere(4, 2, 0);
    let p = Params::zeros(cfg(2, 2, 1, Activation::Relu)).unwrap();
    let s = TrainSchedule::full_batch(Optimizer::Gd, 0, 1e-3);
    assert!(matches!(train(p.clone(), &data, &s, None), Err(Error::InvalidSchedule(_))));
    let s = TrainSchedule::full_batch(Optimizer::Gd, 5, -1.0);
    assert!(train(p, &data, &s, None).is_err());
}

#[test]
fn divergence_is_reported() {
    let data = sphere(20, 3, 3);
    let p = gaussian_params(cfg(3, 30, 3, Activation::Linear), 1.0, 4);
    let s = TrainSchedule::full_batch(Optimizer::Gd, 10_000, 1e6);
    assert!(matches!(train(p, &data, &s, None), Err(Error::Diverged { .. })));
}

#[test]
fn training_is_bit_reproducible() {
    let data = sphere(40, 4, 5);
    let test = sphere(40, 4, 6);
    let p = init_uniform(cfg(4, 6, 2, Activation::Relu), 7).unwrap();
    for s in [
        TrainSchedule::full_batch(Optimizer::Adam, 300, 1e-2),
        TrainSchedule {
            batch_size: Some(7),
            record_every: 25,
            test_eval_every: 50,
            seed: 9,
            ..TrainSchedule::full_batch(Optimizer::Sgd, 300, 1e-2)
        },
    ] {
        let a = train(p.clone(), &data, &s, Some(&test)).unwrap();
        let b = train(p.clone(), &data, &s, Some(&test)).unwrap();
        assert_eq!(a, b);
        assert!(a.records.iter().all(|r| r.step % s.record_every == 0 || r.step == a.steps_run));
    }
}

#[test]
fn recording_cadence_and_endpoint() {
    let data = sphere(60, 4, 5);
    let test = sphere(30, 4, 6);
    let p = init_uniform(cfg(4, 3, 1, Activation::Relu), 7).unwrap();
    let s = TrainSchedule {
        record_every: 10,
        test_eval_every: 20,
        ..TrainSchedule::full_batch(Optimizer::Gd, 95, 1e-2)
    };
    let t = train(p, &data, &s, Some(&test)).unwrap();
    assert_eq!(t.stop, StopReason::StepsExhausted);
    let steps: Vec<u64> = t.records.iter().map(|r| r.step).collect();
    assert_eq!(steps, [0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 95]);
    let with_test: Vec<u64> = t.records.iter().filter(|r| r.test_err.is_some()).map(|r| r.step).collect();
    assert_eq!(with_test, [0, 20, 40, 60, 80, 95]);
    let es = early_stop_summary(&t).unwrap();
    assert!(es.gap() >= 0.0);
}

#[test]
fn gd_decreases_loss_for_small_steps() {
    for seed in 0..5u64 {
        let data = sphere(25, 3, 30 + seed);
        let p = gaussian_params(cfg(3, 6, 2, Activation::Tanh), 1.0, seed);
        let s = TrainSchedule::full_batch(Optimizer::Gd, 200, 1e-3);
        let t = train(p, &data, &s, None).unwrap();
        for w in t.records.windows(2) {
            assert!(w[1].loss <= w[0].loss, "seed {seed}: {} -> {}", w[0].loss, w[1].loss);
        }
    }
}

#[test]
fn learning_rate_decay() {
    let s = TrainSchedule {
        lr_decay_every: Some(250),
        ..TrainSchedule::full_batch(Optimizer::Adam, 1000, 1e-4)
    };
    assert_eq!(s.rate_at(0), 1e-4);
    assert_eq!(s.rate_at(249), 1e-4);
    assert!((s.rate_at(250) - 1e-5).abs() < 1e-20);
    assert!((s.rate_at(999) - 1e-7).abs() < 1e-22);
}

#[test]
fn schedule_json_rejects_unknown_fields() {
    let ok = r#"{"optimizer":"adam","steps":10,"learning_rate":0.001}"#;
    let s: TrainSchedule = serde_json::from_str(ok).unwrap();
    assert_eq!(s.batch_size, None);
    let bad = r#"{"optimizer":"adam","steps":10,"learning_rate":0.001,"momentum":0.9}"#;
    assert!(serde_json::from_str::<TrainSchedule>(bad).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hinge_is_nonnegative_and_zero_iff_satisfied(deltas in proptest::collection::vec(-3.0f64..3.0, 1..40)) {
        let m = MarginVector::from_deltas(deltas);
        let l = hinge_loss(&m);
        prop_assert!(l >= 0.0);
        prop_assert_eq!(l == 0.0, m.n_delta() == 0);
    }

    #[test]
    fn satisfied_patterns_do_not_move_the_gradient(seed in any::<u64>(), shift in 0.0f64..0.5) {
        let c = cfg(3, 5, 2, Activation::Tanh);
        let p = gaussian_params(c, 1.0, seed);
        let data = sphere(20, 3, seed ^ 3);
        let m = margins(&p, &data).unwrap();
        let sat: Vec<usize> = (0..20).filter(|&i| m.deltas()[i] < -0.6).collect();
        prop_assume!(!sat.is_empty());
        let g0 = loss_gradient(&p, &data).unwrap();
        // Nudge satisfied inputs slightly; their margins stay negative.
        let mut inputs = data.inputs().to_vec();
        for &i in &sat {
            for v in &mut inputs[3 * i..3 * i + 3] {
                *v *= 1.0 + 1e-3 * shift;
            }
        }
        let moved = Dataset::new(inputs, 3, data.labels().to_vec(), Provenance::RandomSphere, 0).unwrap();
        let m2 = margins(&p, &moved).unwrap();
        prop_assume!(sat.iter().all(|&i| m2.deltas()[i] < 0.0));
        let g1 = loss_gradient(&p, &moved).unwrap();
        prop_assert_eq!(g0, g1);
    }
}
