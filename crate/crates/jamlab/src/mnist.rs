//! MNIST ingestion: IDX files, whole-set PCA, parity labels.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use jamlab_core::data::{apply_pca, fit_pca, parity_labels, sample_indices, Dataset, Provenance};

use crate::io::load_idx;
use crate::{Error, Result};

pub const IMAGES_FILE: &str = "images-idx3-ubyte";
pub const LABELS_FILE: &str = "labels-idx1-ubyte";

/// `$JAMLAB_MNIST`, else `data/mnist`.
pub fn default_dir() -> PathBuf {
    std::env::var_os("JAMLAB_MNIST").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data/mnist"))
}

/// Every image projected on the top `k` components, with its digit.
#[derive(Debug)]
pub struct Projected {
    pub k: usize,
    pub coords: Vec<f64>,
    pub digits: Vec<u8>,
    pub variances: Vec<f64>,
}

impl Projected {
    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }
}

type Cache = Mutex<HashMap<(PathBuf, usize), Arc<Projected>>>;

fn cache() -> &'static Cache {
    static C: OnceLock<Cache> = OnceLock::new();
    C.get_or_init(Default::default)
}

/// PCA is fitted once on all images in `dir` (pixels in [0, 1]) and cached
/// for the life of the process.
pub fn projected(dir: &Path, k: usize) -> Result<Arc<Projected>> {
    let key = (dir.to_path_buf(), k);
    if let Some(p) = cache().lock().unwrap().get(&key) {
        return Ok(p.clone());
    }
    let (images, digits) = load_idx(&dir.join(IMAGES_FILE), &dir.join(LABELS_FILE))?;
    let dim = images.pixels_per_image();
    let proj = fit_pca(&images.pixels, dim, k)?;
    let coords = apply_pca(&proj, &images.pixels)?;
    let p = Arc::new(Projected { k, coords, digits, variances: proj.variances });
    cache().lock().unwrap().insert(key, p.clone());
    Ok(p)
}

/// Disjoint random train and test subsets with parity labels.
pub fn parity_split(dir: &Path, d: usize, p: usize, p_test: usize, seed: u64) -> Result<(Dataset, Option<Dataset>)> {
    let all = projected(dir, d)?;
    if p + p_test > all.len() {
        return Err(Error::NoData(format!("{} patterns requested, {} images in {}", p + p_test, all.len(), dir.display())));
    }
    let idx = sample_indices(all.len(), p + p_test, seed)?;
    let pick = |ids: &[usize]| -> Result<Dataset> {
        let mut x = Vec::with_capacity(ids.len() * d);
        let mut digits = Vec::with_capacity(ids.len());
        for &i in ids {
            x.extend_from_slice(&all.coords[i * d..(i + 1) * d]);
            digits.push(all.digits[i]);
        }
        Ok(Dataset::new(x, d, parity_labels(&digits)?, Provenance::ImagePca, seed)?)
    };
    let train = pick(&idx[..p])?;
    let test = if p_test > 0 { Some(pick(&idx[p..])?) } else { None };
    Ok((train, test))
}
