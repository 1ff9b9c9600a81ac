//! JSON configuration documents.

use std::path::{Path, PathBuf};

use jamlab_core::data::{random_sphere, Dataset, Provenance};
use jamlab_core::net::{Init, NetworkConfig, Params};
use jamlab_core::objective::TrainSchedule;
use jamlab_core::rng::{mix, tags};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{mnist, Error, Result};

/// Where training and test patterns come from. The input dimension is
/// always taken from the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    RandomSphere {
        p: usize,
        #[serde(default)]
        p_test: usize,
        seed: u64,
    },
    /// Parity-labelled MNIST images projected on their top principal
    /// components.
    MnistPca {
        p: usize,
        #[serde(default)]
        p_test: usize,
        seed: u64,
        /// Directory holding `images-idx3-ubyte` and `labels-idx1-ubyte`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dir: Option<PathBuf>,
    },
    /// Literal patterns (row-major inputs); no test set.
    Inline { inputs: Vec<f64>, labels: Vec<i8> },
}

impl DataSpec {
    pub fn p(&self) -> usize {
        match self {
            DataSpec::RandomSphere { p, .. } | DataSpec::MnistPca { p, .. } => *p,
            DataSpec::Inline { labels, .. } => labels.len(),
        }
    }

    pub fn p_test(&self) -> usize {
        match self {
            DataSpec::RandomSphere { p_test, .. } | DataSpec::MnistPca { p_test, .. } => *p_test,
            DataSpec::Inline { .. } => 0,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            DataSpec::RandomSphere { seed, .. } | DataSpec::MnistPca { seed, .. } => *seed,
            DataSpec::Inline { .. } => 0,
        }
    }

    pub fn set_seed(&mut self, s: u64) {
        match self {
            DataSpec::RandomSphere { seed, .. } | DataSpec::MnistPca { seed, .. } => *seed = s,
            DataSpec::Inline { .. } => {}
        }
    }

    /// Training set and (when `p_test > 0`) a disjoint test set in dimension `d`.
    pub fn build(&self, d: usize) -> Result<(Dataset, Option<Dataset>)> {
        match self {
            DataSpec::RandomSphere { p, p_test, seed } => {
                let train = random_sphere(*p, d, *seed)?;
                let test = match *p_test {
                    0 => None,
                    n => Some(random_sphere(n, d, mix(*seed, tags::TEST))?),
                };
                Ok((train, test))
            }
            DataSpec::MnistPca { p, p_test, seed, dir } => {
                let dir = dir.clone().unwrap_or_else(mnist::default_dir);
                mnist::parity_split(&dir, d, *p, *p_test, *seed)
            }
            DataSpec::Inline { inputs, labels } => {
                Ok((Dataset::new(inputs.clone(), d, labels.clone(), Provenance::RandomSphere, 0)?, None))
            }
        }
    }
}

fn default_init() -> Init {
    Init::Orthogonal
}

/// One training run: `jamlab train --config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub network: NetworkConfig,
    #[serde(default = "default_init")]
    pub init: Init,
    #[serde(default)]
    pub init_seed: u64,
    pub data: DataSpec,
    pub schedule: TrainSchedule,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.schedule.validate()?;
        if self.data.p() == 0 {
            return Err(schema("config", "data.p", "must be at least 1"));
        }
        Ok(())
    }

    pub fn initial_params(&self) -> Result<Params> {
        Ok(self.init.sample(self.network, self.init_seed)?)
    }

    /// Overrides every seed in the document with ones derived from `seed`.
    pub fn reseed(&mut self, seed: u64) {
        self.init_seed = mix(seed, tags::INIT);
        self.data.set_seed(mix(seed, tags::DATA));
        self.schedule.seed = mix(seed, tags::SHUFFLE);
    }
}

pub(crate) fn schema(origin: &str, field: &str, message: &str) -> Error {
    Error::Schema { origin: origin.into(), field: field.into(), message: message.into() }
}

/// Deserializes JSON, reporting the path of the first offending field.
pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        Error::Schema { origin: origin.into(), field, message: e.into_inner().to_string() }
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_json(&text, &path.display().to_string())
}

pub fn load_train_config(path: &Path) -> Result<TrainConfig> {
    let c: TrainConfig = read_json(path)?;
    c.validate()?;
    Ok(c)
}
