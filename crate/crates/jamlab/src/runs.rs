//! Single training runs with their files and manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use jamlab_core::data::Dataset;
use jamlab_core::objective::{train, TrainTrajectory};

use crate::config::TrainConfig;
use crate::io::{read_bytes, save_checkpoint, save_dataset, save_trajectory};
use crate::manifest::{ManifestBuilder, RunManifest};
use crate::{Error, Result};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const TRAIN_DATA_FILE: &str = "train.bin";
pub const TEST_DATA_FILE: &str = "test.bin";

pub struct TrainOutcome {
    pub trajectory: TrainTrajectory,
    pub train: Dataset,
    pub test: Option<Dataset>,
    pub seconds: f64,
}

/// Builds data and initial weights from `config` and trains.
pub fn execute(config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let t0 = Instant::now();
    let (train_set, test_set) = config.data.build(config.network.d)?;
    let params = config.initial_params()?;
    let trajectory = train(params, &train_set, &config.schedule, test_set.as_ref())?;
    Ok(TrainOutcome { trajectory, train: train_set, test: test_set, seconds: t0.elapsed().as_secs_f64() })
}

/// Trajectory, checkpoint and datasets under `dir`, plus their manifest.
pub fn train_run(config: &TrainConfig, dir: &Path) -> Result<(TrainOutcome, RunManifest)> {
    let mut mb = ManifestBuilder::new(dir, "train", config);
    let out = execute(config)?;
    save_trajectory(&dir.join(TRAJECTORY_FILE), &out.trajectory)?;
    save_checkpoint(&dir.join(CHECKPOINT_FILE), &out.trajectory.params)?;
    save_dataset(&dir.join(TRAIN_DATA_FILE), &out.train)?;
    mb.dataset(&out.train);
    let mut files: Vec<PathBuf> = vec![TRAJECTORY_FILE.into(), CHECKPOINT_FILE.into(), TRAIN_DATA_FILE.into()];
    if let Some(t) = &out.test {
        save_dataset(&dir.join(TEST_DATA_FILE), t)?;
        mb.dataset(t);
        files.push(TEST_DATA_FILE.into());
    }
    for f in files {
        mb.output(f);
    }
    mb.runtime(out.seconds);
    let m = mb.finish()?;
    Ok((out, m))
}

/// Re-executes the run behind a manifest into `scratch` and compares every
/// CSV output byte for byte. Returns the number of files compared.
pub fn rerun_and_compare(manifest: &Path, scratch: &Path, jobs: usize) -> Result<usize> {
    let m = crate::manifest::load_manifest(manifest)?;
    let text = m.config.to_string();
    let origin = manifest.display().to_string();
    match m.kind.as_str() {
        "train" => {
            let c: TrainConfig = crate::config::parse_json(&text, &origin)?;
            train_run(&c, scratch)?;
        }
        "sweep" => {
            let c: crate::sweeps::SweepConfig = crate::config::parse_json(&text, &origin)?;
            crate::sweeps::run_sweep(&c, scratch, jobs)?;
        }
        k => return Err(Error::Verify(format!("{origin}: cannot re-execute a `{k}` manifest"))),
    }
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let mut compared = 0;
    for o in m.outputs.iter().filter(|o| o.path.extension().is_some_and(|e| e == "csv")) {
        let a = read_bytes(&dir.join(&o.path))?;
        let b = read_bytes(&scratch.join(&o.path))?;
        if a != b {
            return Err(Error::Verify(format!("{}: re-execution differs", o.path.display())));
        }
        compared += 1;
    }
    Ok(compared)
}
