//! Checkpoints, trajectories, datasets and IDX files on disk.

use std::fs;
use std::path::Path;

use jamlab_core::data::{parse_idx_images, parse_idx_labels, Dataset, IdxImages, Provenance};
use jamlab_core::net::Params;
use jamlab_core::objective::{TrainRecord, TrainTrajectory};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::read_json;
use crate::{Error, Result};

const DATASET_MAGIC: &[u8; 4] = b"JLDS";
const DATASET_VERSION: u32 = 1;

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    read_json(path)
}

/// `{config, flat_params}` checkpoint.
pub fn save_checkpoint(path: &Path, params: &Params) -> Result<()> {
    write_json(path, params)
}

pub fn load_checkpoint(path: &Path) -> Result<Params> {
    read_json(path)
}

/// Images and labels from a pair of IDX files, pixels rescaled to [0, 1].
pub fn load_idx(images: &Path, labels: &Path) -> Result<(IdxImages, Vec<u8>)> {
    let im = parse_idx_images(&read_bytes(images)?).map_err(|e| Error::DatasetFile(images.into(), e.to_string()))?;
    let lb = parse_idx_labels(&read_bytes(labels)?).map_err(|e| Error::DatasetFile(labels.into(), e.to_string()))?;
    if im.count != lb.len() {
        return Err(Error::DatasetFile(
            labels.into(),
            format!("{} labels for {} images", lb.len(), im.count),
        ));
    }
    Ok((im, lb))
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRow {
    step: u64,
    loss: f64,
    n_delta: usize,
    train_err: f64,
    test_err: Option<f64>,
}

/// CSV with columns `step,loss,n_delta,train_err,test_err`.
pub fn trajectory_csv(traj: &TrainTrajectory) -> Vec<u8> {
    records_csv(&traj.records)
}

pub fn records_csv(records: &[TrainRecord]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(TrajectoryRow {
            step: r.step,
            loss: r.loss,
            n_delta: r.n_delta,
            train_err: r.train_err,
            test_err: r.test_err,
        })
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn save_trajectory(path: &Path, traj: &TrainTrajectory) -> Result<()> {
    write_bytes(path, &trajectory_csv(traj))
}

pub fn load_trajectory(path: &Path) -> Result<Vec<TrainRecord>> {
    let rows: Vec<TrajectoryRow> = read_csv(path)?;
    Ok(rows
        .into_iter()
        .map(|r| TrainRecord { step: r.step, loss: r.loss, n_delta: r.n_delta, train_err: r.train_err, test_err: r.test_err })
        .collect())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Csv(path.into(), e))?;
    r.deserialize().collect::<std::result::Result<Vec<T>, _>>().map_err(|e| Error::Csv(path.into(), e))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_bytes(path, &csv_bytes(rows))
}

pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Flat binary layout, little endian: `JLDS`, version u32, P u64, d u64,
/// provenance u8, seed u64, then P·d f64 row-major, then P i8 labels.
pub fn dataset_to_bytes(data: &Dataset) -> Vec<u8> {
    let (p, d) = (data.len(), data.dim());
    let mut out = Vec::with_capacity(33 + 8 * p * d + p);
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    out.extend_from_slice(&(p as u64).to_le_bytes());
    out.extend_from_slice(&(d as u64).to_le_bytes());
    out.push(data.provenance().code());
    out.extend_from_slice(&data.seed().to_le_bytes());
    for v in data.inputs() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend(data.labels().iter().map(|&y| y as u8));
    out
}

pub fn dataset_from_bytes(bytes: &[u8], origin: &Path) -> Result<Dataset> {
    let bad = |m: &str| Error::DatasetFile(origin.into(), m.into());
    let mut cur = bytes;
    let mut take = |n: usize| -> Result<&[u8]> {
        if cur.len() < n {
            return Err(bad("truncated"));
        }
        let (a, b) = cur.split_at(n);
        cur = b;
        Ok(a)
    };
    if take(4)? != DATASET_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != DATASET_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let p = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let d = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let prov = Provenance::from_code(take(1)?[0]).ok_or_else(|| bad("unknown provenance"))?;
    let seed = u64::from_le_bytes(take(8)?.try_into().unwrap());
    let n = p.checked_mul(d).and_then(|n| n.checked_mul(8)).ok_or_else(|| bad("header overflow"))?;
    let inputs = take(n)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let labels = take(p)?.iter().map(|&b| b as i8).collect();
    if !cur.is_empty() {
        return Err(bad("trailing bytes"));
    }
    Dataset::new(inputs, d, labels, prov, seed).map_err(|e| bad(&e.to_string()))
}

/// Binary when the extension is `.bin`, JSON otherwise.
pub fn save_dataset(path: &Path, data: &Dataset) -> Result<()> {
    if path.extension().is_some_and(|e| e == "bin") {
        write_bytes(path, &dataset_to_bytes(data))
    } else {
        write_json(path, data)
    }
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    if path.extension().is_some_and(|e| e == "bin") {
        dataset_from_bytes(&read_bytes(path)?, path)
    } else {
        read_json(path)
    }
}
