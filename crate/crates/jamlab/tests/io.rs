use std::fs;
use std::path::{Path, PathBuf};

use jamlab::core::data::{random_sphere, Dataset, Provenance};
use jamlab::core::net::{init_orthogonal, Activation, NetworkConfig};
use jamlab::core::objective::{train, Optimizer, TrainSchedule};
use jamlab::io::*;
use jamlab::Error;

fn mnist_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
}

#[test]
fn mnist_test_file_shape_and_first_image() {
    let dir = mnist_dir();
    let (im, labels) = load_idx(&dir.join("images-idx3-ubyte"), &dir.join("labels-idx1-ubyte")).unwrap();
    assert_eq!((im.count, im.rows, im.cols), (10_000, 28, 28));
    assert_eq!(labels.len(), 10_000);
    assert!(labels.iter().all(|&l| l < 10));
    assert!(im.pixels.iter().all(|&v| (0.0..=1.0).contains(&v)));

    // Independent reader: fixed offsets of the format, big-endian header.
    let raw = fs::read(dir.join("images-idx3-ubyte")).unwrap();
    assert_eq!(u32::from_be_bytes(raw[0..4].try_into().unwrap()), 0x0803);
    let first = &raw[16..16 + 784];
    let want: u64 = first.iter().map(|&b| b as u64).sum();
    let got: f64 = im.image(0).iter().map(|v| v * 255.0).sum();
    assert!((got - want as f64).abs() < 1e-6);
    for (a, &b) in im.image(0).iter().zip(first) {
        assert_eq!((a * 255.0).round() as u8, b);
    }
    let raw_labels = fs::read(dir.join("labels-idx1-ubyte")).unwrap();
    assert_eq!(&raw_labels[8..], labels.as_slice());
}

#[test]
fn idx_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = mnist_dir();
    let raw = fs::read(dir.join("images-idx3-ubyte")).unwrap();
    let cut = tmp.path().join("cut");
    fs::write(&cut, &raw[..raw.len() - 10]).unwrap();
    assert!(matches!(load_idx(&cut, &dir.join("labels-idx1-ubyte")), Err(Error::DatasetFile(..))));

    // Two images against 10k labels.
    let mut small = raw[..16 + 2 * 784].to_vec();
    small[4..8].copy_from_slice(&2u32.to_be_bytes());
    let two = tmp.path().join("two");
    fs::write(&two, &small).unwrap();
    let err = load_idx(&two, &dir.join("labels-idx1-ubyte")).unwrap_err();
    assert!(err.to_string().contains("10000 labels for 2 images"), "{err}");

    let mut bad = raw[..16 + 784].to_vec();
    bad[3] = 0x01;
    let badp = tmp.path().join("bad");
    fs::write(&badp, &bad).unwrap();
    assert!(load_idx(&badp, &dir.join("labels-idx1-ubyte")).is_err());
}

#[test]
fn dataset_files_round_trip_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let d = random_sphere(37, 6, 4).unwrap();
    for name in ["d.bin", "d.json"] {
        let p = tmp.path().join(name);
        save_dataset(&p, &d).unwrap();
        assert_eq!(load_dataset(&p).unwrap(), d);
    }
    let bytes = dataset_to_bytes(&d);
    assert_eq!(bytes.len(), 33 + 37 * 6 * 8 + 37);
    assert_eq!(&bytes[..4], b"JLDS");
    let mut corrupt = bytes.clone();
    corrupt[0] = b'X';
    assert!(dataset_from_bytes(&corrupt, Path::new("x")).is_err());
    assert!(dataset_from_bytes(&bytes[..bytes.len() - 1], Path::new("x")).is_err());
    let mut label = bytes.clone();
    *label.last_mut().unwrap() = 3;
    assert!(dataset_from_bytes(&label, Path::new("x")).is_err());
}

#[test]
fn conflicting_duplicates_are_rejected_on_load() {
    let d = Dataset::new(vec![1.0, 2.0, 3.0, 4.0], 2, vec![1, -1], Provenance::ImagePca, 0).unwrap();
    let mut bytes = dataset_to_bytes(&d);
    // Overwrite the second input with the first.
    let first: Vec<u8> = bytes[33..49].to_vec();
    bytes[49..65].copy_from_slice(&first);
    assert!(dataset_from_bytes(&bytes, Path::new("x")).is_err());
}

#[test]
fn checkpoint_and_trajectory_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let c = NetworkConfig::new(3, 5, 2, Activation::Relu).unwrap();
    let data = random_sphere(20, 3, 1).unwrap();
    let test = random_sphere(10, 3, 2).unwrap();
    let s = TrainSchedule { record_every: 7, test_eval_every: 14, ..TrainSchedule::full_batch(Optimizer::Adam, 50, 1e-2) };
    let t = train(init_orthogonal(c, 3).unwrap(), &data, &s, Some(&test)).unwrap();

    let ck = tmp.path().join("ck.json");
    save_checkpoint(&ck, &t.params).unwrap();
    let back = load_checkpoint(&ck).unwrap();
    assert_eq!(back, t.params);
    assert!(back.flat().iter().zip(t.params.flat()).all(|(a, b)| a.to_bits() == b.to_bits()));
    let text = fs::read_to_string(&ck).unwrap();
    assert!(text.contains("\"flat_params\"") && text.contains("\"L\": 2"));

    let tr = tmp.path().join("t.csv");
    save_trajectory(&tr, &t).unwrap();
    let text = fs::read_to_string(&tr).unwrap();
    assert!(text.starts_with("step,loss,n_delta,train_err,test_err\n"));
    assert_eq!(load_trajectory(&tr).unwrap(), t.records);
}

#[test]
fn checkpoint_with_wrong_length_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("ck.json");
    fs::write(&p, r#"{"config":{"d":1,"h":1,"L":1,"activation":"relu"},"flat_params":[1,2,3]}"#).unwrap();
    assert!(load_checkpoint(&p).is_err());
}
