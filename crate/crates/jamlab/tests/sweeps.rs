use jamlab::core::net::{Activation, Init};
use jamlab::core::objective::{Optimizer, RunClass, TrainSchedule};
use jamlab::config::parse_json;
use jamlab::sweeps::*;

fn adam(steps: u64) -> TrainSchedule {
    TrainSchedule { record_every: 500, ..TrainSchedule::full_batch(Optimizer::Adam, steps, 1e-2) }
}

fn toy(inputs: Vec<f64>, labels: Vec<i8>) -> Sweep {
    let t = Template { d: Some(2), depth: 1, activation: Activation::Relu, init: Init::Orthogonal };
    Sweep::new(t, DataSource::Inline { inputs, labels }, adam(20_000))
}

fn opts() -> LocateOptions {
    LocateOptions { h_start: 8, h_max: 64, check_neighbors: false, max_runs: 20 }
}

#[test]
fn two_points_fit_at_every_width() {
    // Antipodal inputs: a single unit is active on exactly one of them.
    let s = toy(vec![0.6, 0.8, -0.6, -0.8], vec![1, -1]);
    // Exhaustive scan oracle.
    for h in 1..=8 {
        assert_eq!(s.run_cell(&s.template, 2, h, 0).unwrap().class, RunClass::Fitting, "h = {h}");
    }
    let (e, runs) = locate_transition(&s, 2, 0, &opts()).unwrap();
    assert!(e.saturated);
    assert_eq!((e.h_fit, e.h_star, e.n_star), (1, 0, 1));
    assert_eq!(runs.len(), 4);
}

#[test]
fn xor_needs_two_units() {
    let s = toy(vec![1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0, 1.0], vec![1, 1, -1, -1]);
    let scan: Vec<RunClass> = (1..=6).map(|h| s.run_cell(&s.template, 4, h, 0).unwrap().class).collect();
    assert_eq!(scan[0], RunClass::Jammed);
    assert!(scan[1..].iter().all(|&c| c == RunClass::Fitting), "{scan:?}");
    let (e, _) = locate_transition(&s, 4, 0, &opts()).unwrap();
    assert_eq!((e.h_star, e.h_fit), (1, 2));
    assert_eq!(e.n_star, 5);
    assert!(!e.saturated);
    assert_eq!(e.fit_n_delta, 0);
    assert_eq!(e.monotone_violations, 0);
}

#[test]
fn locating_from_a_jammed_start_doubles_up() {
    let s = toy(vec![1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0, 1.0], vec![1, 1, -1, -1]);
    let o = LocateOptions { h_start: 1, check_neighbors: true, ..opts() };
    let (e, runs) = locate_transition(&s, 4, 0, &o).unwrap();
    assert_eq!((e.h_star, e.h_fit), (1, 2));
    assert!(runs.iter().any(|r| r.h == 3));
    let budget = LocateOptions { h_start: 1, h_max: 1, ..opts() };
    assert!(matches!(locate_transition(&s, 4, 0, &budget), Err(jamlab::Error::Budget(_))));
}

#[test]
fn cells_are_reproducible_and_unique() {
    let t = Template { d: None, depth: 2, activation: Activation::Relu, init: Init::Orthogonal };
    let s = Sweep::new(t, DataSource::RandomSphere { p_test: 20 }, adam(300));
    let a = jump_scan(&s, 4, &[10, 30], &[0, 1]).unwrap();
    let b = jump_scan(&Sweep { jobs: 3, ..s.clone() }, 4, &[10, 30], &[0, 1]).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.rows.len(), 4);
    let mut dup = a.clone();
    assert!(dup.insert(a.rows[0].clone()).is_err());
    let header = String::from_utf8(a.to_csv()).unwrap().lines().next().unwrap().to_string();
    assert!(!header.contains("runtime"));
    assert!(header.starts_with("p,h,L,seed,d,n,loss,n_delta,n_delta_over_n,p_over_n"));
}

#[test]
fn far_below_the_transition_everything_fits() {
    let t = Template { d: None, depth: 2, activation: Activation::Relu, init: Init::Orthogonal };
    let s = Sweep::new(t, DataSource::RandomSphere { p_test: 0 }, adam(20_000));
    let r = jump_scan(&s, 10, &[5, 10, 20], &[0, 1]).unwrap();
    assert!(r.rows.iter().all(|x| x.class == RunClass::Fitting && x.n_delta == 0 && x.loss == 0.0));
}

#[test]
fn single_width_generalization_sweep() {
    let t = Template { d: Some(5), depth: 2, activation: Activation::Relu, init: Init::Orthogonal };
    let s = Sweep::new(t, DataSource::RandomSphere { p_test: 50 }, adam(200));
    let r = generalization_sweep(&s, 40, &[6], &[3], Some(100)).unwrap();
    assert_eq!(r.rows.len(), 1);
    let row = &r.rows[0];
    assert!(row.final_test_err.is_some() && row.min_test_err.is_some());
    assert!(row.min_test_err <= row.final_test_err);
    assert_eq!(row.n_over_n_star, Some(row.n as f64 / 100.0));
    let no_test = Sweep::new(t, DataSource::RandomSphere { p_test: 0 }, adam(200));
    assert!(generalization_sweep(&no_test, 40, &[6], &[3], None).is_err());
}

#[test]
fn depth_pair_shares_its_data() {
    let t = Template { d: Some(4), depth: 2, activation: Activation::Relu, init: Init::Orthogonal };
    let s = Sweep::new(t, DataSource::RandomSphere { p_test: 10 }, adam(100));
    let a = s.cell_config(&t.with_depth(2), 30, 5, 7).unwrap();
    let b = s.cell_config(&t.with_depth(5), 30, 3, 7).unwrap();
    assert_eq!(a.data, b.data);
    assert_eq!(a.data.build(4).unwrap(), b.data.build(4).unwrap());
    assert_ne!(a.init_seed, b.init_seed);
    let pair = depth_comparison(&s, 30, &[2, 5], &[vec![3], vec![2]], &[0], &[None, None]).unwrap();
    assert_eq!(pair.len(), 2);
    assert_eq!(pair[1].rows[0].depth, 5);
}

#[test]
fn sweep_documents_are_strict() {
    let ok = r#"{
        "template": {"L": 2, "activation": "relu"},
        "data": {"kind": "random_sphere"},
        "schedule": {"optimizer": "adam", "steps": 100, "learning_rate": 0.001},
        "seeds": [0],
        "protocol": {"locate_transition": {"ps": [50], "options": {"h_start": 4, "h_max": 32}}}
    }"#;
    let c: SweepConfig = parse_json(ok, "ok").unwrap();
    assert_eq!(c.template.init, Init::Orthogonal);
    let bad = ok.replace("\"h_max\": 32", "\"h_max\": 32, \"step\": 2");
    let err = parse_json::<SweepConfig>(&bad, "bad").unwrap_err().to_string();
    assert!(err.contains("protocol.locate_transition.options"), "{err}");
}

#[test]
fn shipped_configs_are_valid() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let train = jamlab::config::load_train_config(&dir.join("train_sphere.json")).unwrap();
    assert_eq!(train.network.count_params(), 341);
    for name in ["locate_random.json", "jump_scan.json", "generalization_mnist.json"] {
        let c: SweepConfig = jamlab::config::read_json(&dir.join(name)).unwrap();
        c.validate().unwrap();
    }
}
