mod common;

use common::*;
use jamlab_core::data::*;
use jamlab_core::Error;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn sphere_norms() {
    let d = sphere(500, 9, 3);
    for i in 0..d.len() {
        let r2: f64 = d.input(i).iter().map(|v| v * v).sum();
        assert!((r2 - 9.0).abs() <= 1e-9);
    }
    assert_eq!(d.provenance(), Provenance::RandomSphere);
}

#[test]
fn sphere_mean_and_label_balance() {
    let (p, dim) = (100_000, 6);
    let d = sphere(p, dim, 4);
    let mut mean = vec![0.0; dim];
    for i in 0..p {
        for (m, v) in mean.iter_mut().zip(d.input(i)) {
            *m += v / p as f64;
        }
    }
    let norm = mean.iter().map(|m| m * m).sum::<f64>().sqrt();
    assert!(norm <= 3.0 * (dim as f64 / p as f64).sqrt());
    let pos = d.labels().iter().filter(|&&y| y == 1).count() as f64;
    assert!((pos - p as f64 / 2.0).abs() <= 3.0 * (p as f64 / 4.0).sqrt());
}

#[test]
fn sphere_seeds_are_reproducible_and_disjoint() {
    let a = sphere(300, 4, 1);
    assert_eq!(a, sphere(300, 4, 1));
    let b = sphere(300, 4, 2);
    for i in 0..a.len() {
        for j in 0..b.len() {
            assert_ne!(a.input(i), b.input(j));
        }
    }
    assert_eq!(a.duplicate_count(), 0);
}

#[test]
fn relabelling_keeps_inputs() {
    let a = sphere(200, 3, 1);
    let b = a.with_random_labels(99);
    assert_eq!(a.inputs(), b.inputs());
    assert_ne!(a.labels(), b.labels());
}

#[test]
fn dataset_json_round_trip_is_exact() {
    let a = sphere(50, 5, 8);
    let s = serde_json::to_string(&a).unwrap();
    let b: Dataset = serde_json::from_str(&s).unwrap();
    assert_eq!(a, b);
    let bad = s.replace("\"labels\":[", "\"labels\":[3,");
    assert!(serde_json::from_str::<Dataset>(&bad).is_err());
}

#[test]
fn parity_histogram() {
    let digits: Vec<u8> = (0..1000).map(|i| (i * 7 % 10) as u8).collect();
    let y = parity_labels(&digits).unwrap();
    let even = y.iter().filter(|&&v| v == 1).count();
    let odd = y.iter().filter(|&&v| v == -1).count();
    assert_eq!(even + odd, 1000);
    assert_eq!(even, digits.iter().filter(|&&k| k % 2 == 0).count());
    assert!(matches!(parity_labels(&[11]), Err(Error::InvalidDigit(11))));
}

#[test]
fn idx_truncated_and_count_mismatch() {
    let mut f = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2];
    f.extend_from_slice(&[0, 128, 255, 1, 2, 3, 4]);
    assert!(matches!(parse_idx_images(&f), Err(Error::Idx(_))));
    f.push(5);
    let im = parse_idx_images(&f).unwrap();
    assert_eq!(im.count, 2);
    assert_eq!(im.image(0)[2], 1.0);
}

fn structured_sample(n: usize, dim: usize, seed: u64) -> Vec<f64> {
    // Anisotropic Gaussian cloud with a shifted mean.
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(n * dim);
    for _ in 0..n {
        for j in 0..dim {
            let g: f64 = (0..12).map(|_| r.random::<f64>()).sum::<f64>() - 6.0;
            out.push(3.0 + g / (1.0 + j as f64));
        }
    }
    out
}

#[test]
fn pca_variances_match_independent_eigensolver() {
    let (n, dim, k) = (400, 12, 5);
    let x = structured_sample(n, dim, 1);
    let proj = fit_pca(&x, dim, k).unwrap();
    let m = DMatrix::from_row_slice(n, dim, &x);
    let mean = m.row_mean();
    let mut c = m.clone();
    for mut row in c.row_iter_mut() {
        row -= &mean;
    }
    let cov = (c.transpose() * &c) / (n as f64 - 1.0);
    let mut ev: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    for i in 0..k {
        assert!((proj.variances[i] - ev[i]).abs() <= 1e-8 * ev[0]);
    }
    for w in proj.variances.windows(2) {
        assert!(w[0] >= w[1]);
    }
    let g = proj.components.matmul(&proj.components.transpose());
    for i in 0..k {
        for j in 0..k {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((g[(i, j)] - want).abs() <= 1e-10);
        }
    }
}

#[test]
fn projected_covariance_is_diagonal() {
    let (n, dim, k) = (300, 8, 4);
    let x = structured_sample(n, dim, 2);
    let proj = fit_pca(&x, dim, k).unwrap();
    let z = apply_pca(&proj, &x).unwrap();
    for a in 0..k {
        for b in 0..k {
            let s: f64 = (0..n).map(|i| z[i * k + a] * z[i * k + b]).sum::<f64>() / (n as f64 - 1.0);
            if a == b {
                assert!((s - proj.variances[a]).abs() <= 1e-9 * proj.variances[0]);
            } else {
                assert!(s.abs() <= 1e-9 * proj.variances[0]);
            }
        }
    }
}

#[test]
fn pca_rejects_degenerate_input() {
    let x = vec![1.0; 30];
    assert!(matches!(fit_pca(&x, 3, 1), Err(Error::DegenerateCovariance(_))));
    assert!(fit_pca(&[1.0, 2.0, 3.0], 3, 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn projection_is_idempotent(seed in any::<u64>(), k in 1usize..6) {
        let dim = 7;
        let x = structured_sample(60, dim, seed);
        let proj = fit_pca(&x, dim, k).unwrap();
        let z = apply_pca(&proj, &x).unwrap();
        let back: Vec<f64> = z.chunks_exact(k).flat_map(|c| proj.reconstruct(c)).collect();
        let z2 = apply_pca(&proj, &back).unwrap();
        for (a, b) in z.iter().zip(&z2) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn sample_indices_are_distinct(total in 1usize..200, frac in 0.0f64..1.0, seed in any::<u64>()) {
        let n = (total as f64 * frac) as usize;
        let mut idx = sample_indices(total, n, seed).unwrap();
        prop_assert_eq!(idx.len(), n);
        idx.sort_unstable();
        idx.dedup();
        prop_assert_eq!(idx.len(), n);
    }
}
