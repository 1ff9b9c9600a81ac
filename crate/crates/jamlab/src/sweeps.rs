//! Protocols over the (N, P) plane: transition location, jump scans at
//! fixed architecture, and generalization sweeps at fixed P.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use jamlab_core::net::{count_params, Activation, Init, NetworkConfig};
use jamlab_core::objective::{classify, early_stop_summary, RunClass, TrainSchedule};
use jamlab_core::rng::mix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{schema, DataSpec, TrainConfig};
use crate::io::{csv_bytes, read_csv, save_checkpoint, save_trajectory, write_bytes};
use crate::manifest::{ManifestBuilder, RunManifest};
use crate::runs::{execute, CHECKPOINT_FILE, TRAJECTORY_FILE};
use crate::{Error, Result};

fn orthogonal() -> Init {
    Init::Orthogonal
}

/// Architecture with the width left free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Template {
    /// Input dimension; absent means `d = h`.
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(rename = "L")]
    pub depth: usize,
    pub activation: Activation,
    #[serde(default = "orthogonal")]
    pub init: Init,
}

impl Template {
    pub fn input_dim(&self, h: usize) -> usize {
        self.d.unwrap_or(h)
    }

    pub fn config(&self, h: usize) -> Result<NetworkConfig> {
        Ok(NetworkConfig::new(self.input_dim(h), h, self.depth, self.activation)?)
    }

    /// Parameter count at width `h`; `h = 0` gives 1, the lone output bias.
    pub fn count(&self, h: usize) -> usize {
        let c = NetworkConfig { d: self.input_dim(h), h, depth: self.depth, activation: self.activation };
        count_params(&c)
    }

    pub fn with_depth(self, depth: usize) -> Self {
        Self { depth, ..self }
    }
}

/// Data family for the cells of a sweep; size and seed come from the cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    RandomSphere {
        #[serde(default)]
        p_test: usize,
    },
    MnistPca {
        #[serde(default)]
        p_test: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dir: Option<PathBuf>,
    },
    /// Fixed patterns; every cell must ask for exactly their number.
    Inline { inputs: Vec<f64>, labels: Vec<i8> },
}

impl DataSource {
    pub fn spec(&self, p: usize, seed: u64) -> DataSpec {
        match self {
            DataSource::Inline { inputs, labels } => DataSpec::Inline { inputs: inputs.clone(), labels: labels.clone() },
            DataSource::RandomSphere { p_test } => DataSpec::RandomSphere { p, p_test: *p_test, seed },
            DataSource::MnistPca { p_test, dir } => DataSpec::MnistPca { p, p_test: *p_test, seed, dir: dir.clone() },
        }
    }
}

/// Data seed of a cell. It ignores width and depth, so every architecture
/// at the same `(P, seed)` sees the same patterns (for a fixed `d`).
pub fn data_seed(p: usize, seed: u64) -> u64 {
    mix(seed, p as u64)
}

/// One trained grid cell. `runtime` is kept out of the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub p: usize,
    pub h: usize,
    #[serde(rename = "L")]
    pub depth: usize,
    pub seed: u64,
    pub d: usize,
    pub n: usize,
    pub loss: f64,
    pub n_delta: usize,
    pub n_delta_over_n: f64,
    pub p_over_n: f64,
    pub train_err: f64,
    pub final_test_err: Option<f64>,
    pub min_test_err: Option<f64>,
    pub min_test_step: Option<u64>,
    pub n_over_n_star: Option<f64>,
    pub steps_run: u64,
    pub stop: String,
    pub class: RunClass,
    /// Relative to the sweep's output directory.
    pub checkpoint: Option<String>,
    #[serde(skip)]
    pub runtime: f64,
}

impl RunSummary {
    pub fn key(&self) -> (usize, usize, usize, u64) {
        (self.p, self.h, self.depth, self.seed)
    }
}

/// Rows keyed by `(P, h, L, seed)`, each key at most once.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepResult {
    pub protocol: String,
    pub rows: Vec<RunSummary>,
}

impl SweepResult {
    pub fn new(protocol: &str) -> Self {
        Self { protocol: protocol.into(), rows: Vec::new() }
    }

    pub fn insert(&mut self, row: RunSummary) -> Result<()> {
        if self.rows.iter().any(|r| r.key() == row.key()) {
            return Err(schema(&self.protocol, "rows", &format!("duplicate cell {:?}", row.key())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_csv(&self) -> Vec<u8> {
        csv_bytes(&self.rows)
    }

    pub fn load(path: &Path, protocol: &str) -> Result<Self> {
        let mut s = Self::new(protocol);
        for r in read_csv::<RunSummary>(path)? {
            s.insert(r)?;
        }
        Ok(s)
    }

    pub fn runtimes(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.runtime).collect()
    }
}

/// What every cell of a sweep shares.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub template: Template,
    pub data: DataSource,
    pub schedule: TrainSchedule,
    /// Per-cell trajectory and checkpoint go under `<out>/cells/` when set.
    pub out: Option<PathBuf>,
    pub jobs: usize,
}

impl Sweep {
    pub fn new(template: Template, data: DataSource, schedule: TrainSchedule) -> Self {
        Self { template, data, schedule, out: None, jobs: 1 }
    }

    /// The replayable training configuration of a cell.
    pub fn cell_config(&self, template: &Template, p: usize, h: usize, seed: u64) -> Result<TrainConfig> {
        let ds = data_seed(p, seed);
        let data = self.data.spec(p, ds);
        if data.p() != p {
            return Err(schema("sweep", "data", &format!("inline data has {} patterns, cell asks for {p}", data.p())));
        }
        Ok(TrainConfig {
            network: template.config(h)?,
            init: template.init,
            init_seed: mix(ds, (template.depth as u64) << 32 | h as u64),
            data,
            schedule: TrainSchedule { seed: ds, ..self.schedule.clone() },
        })
    }

    pub fn run_cell(&self, template: &Template, p: usize, h: usize, seed: u64) -> Result<RunSummary> {
        let cfg = self.cell_config(template, p, h, seed)?;
        let out = execute(&cfg)?;
        let traj = &out.trajectory;
        let n = cfg.network.count_params();
        let last = traj.last();
        let es = out.test.as_ref().map(|_| early_stop_summary(traj)).transpose()?;
        let checkpoint = match &self.out {
            Some(root) => {
                let rel = PathBuf::from("cells").join(format!("P{p}_L{}_h{h}_s{seed}", template.depth));
                save_trajectory(&root.join(&rel).join(TRAJECTORY_FILE), traj)?;
                save_checkpoint(&root.join(&rel).join(CHECKPOINT_FILE), &traj.params)?;
                Some(rel.join(CHECKPOINT_FILE).to_string_lossy().into_owned())
            }
            None => None,
        };
        Ok(RunSummary {
            p,
            h,
            depth: template.depth,
            seed,
            d: cfg.network.d,
            n,
            loss: last.loss,
            n_delta: last.n_delta,
            n_delta_over_n: last.n_delta as f64 / n as f64,
            p_over_n: p as f64 / n as f64,
            train_err: last.train_err,
            final_test_err: es.map(|e| e.final_error),
            min_test_err: es.map(|e| e.min_error),
            min_test_step: es.map(|e| e.min_step),
            n_over_n_star: None,
            steps_run: traj.steps_run,
            stop: traj.stop.to_string(),
            class: classify(last.n_delta, n),
            checkpoint,
            runtime: out.seconds,
        })
    }

    fn pool(&self) -> rayon::ThreadPool {
        rayon::ThreadPoolBuilder::new().num_threads(self.jobs.max(1)).build().expect("thread pool")
    }

    /// Runs independent cells on the work queue; output order follows `cells`.
    pub fn run_cells(&self, cells: &[(Template, usize, usize, u64)]) -> Result<Vec<RunSummary>> {
        self.pool().install(|| cells.par_iter().map(|(t, p, h, s)| self.run_cell(t, *p, *h, *s)).collect())
    }
}

/// Bracket around the jamming transition at one `P`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionEstimate {
    pub protocol: String,
    pub p: usize,
    pub seed: u64,
    /// Parameter count at the first jammed width.
    pub n_star: usize,
    pub h_star: usize,
    /// Smallest width that was not jammed.
    pub h_fit: usize,
    pub n_fit: usize,
    /// `N_Δ` at `h_fit`; nonzero only when that run was unresolved.
    pub fit_n_delta: usize,
    pub jam_n_delta_over_n: Option<f64>,
    /// `h_fit = 1` already fits; `h_star = 0` stands for the constant network.
    pub saturated: bool,
    pub runs: usize,
    /// Evaluated (fitting, jammed) width pairs with the fitting one narrower.
    pub monotone_violations: usize,
}

/// Options of [`locate_transition`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocateOptions {
    pub h_start: usize,
    pub h_max: usize,
    /// Also train `h_star − 1` and `h_fit + 1` to probe monotonicity.
    #[serde(default)]
    pub check_neighbors: bool,
    #[serde(default = "default_max_runs")]
    pub max_runs: usize,
}

fn default_max_runs() -> usize {
    64
}

/// Unresolved endpoints (0 < N_Δ ≤ 0.1 N) count as fitting while searching.
fn not_jammed(r: &RunSummary) -> bool {
    r.class != RunClass::Jammed
}

/// Doubles the width from `h_start` until a run fits, halves until one
/// jams, then bisects to adjacent widths.
pub fn locate_transition(sweep: &Sweep, p: usize, seed: u64, opts: &LocateOptions) -> Result<(TransitionEstimate, Vec<RunSummary>)> {
    let t = sweep.template;
    let mut seen: BTreeMap<usize, RunSummary> = BTreeMap::new();
    let eval = |h: usize, seen: &mut BTreeMap<usize, RunSummary>| -> Result<bool> {
        if let Some(r) = seen.get(&h) {
            return Ok(not_jammed(r));
        }
        if seen.len() >= opts.max_runs {
            return Err(Error::Budget(format!("P={p} seed={seed}: {} runs without a bracket", opts.max_runs)));
        }
        let r = sweep.run_cell(&t, p, h, seed)?;
        let ok = not_jammed(&r);
        seen.insert(h, r);
        Ok(ok)
    };
    let mut h = opts.h_start.clamp(1, opts.h_max.max(1));
    let (mut lo, mut hi);
    if eval(h, &mut seen)? {
        hi = h;
        lo = 0;
        while h > 1 {
            h /= 2;
            if eval(h, &mut seen)? {
                hi = h;
            } else {
                lo = h;
                break;
            }
        }
    } else {
        lo = h;
        loop {
            if h >= opts.h_max {
                return Err(Error::Budget(format!("P={p} seed={seed}: still jammed at h_max={}", opts.h_max)));
            }
            h = (2 * h).min(opts.h_max);
            if eval(h, &mut seen)? {
                hi = h;
                break;
            }
            lo = h;
        }
    }
    while lo > 0 && hi - lo > 1 {
        let m = (lo + hi) / 2;
        if eval(m, &mut seen)? {
            hi = m;
        } else {
            lo = m;
        }
    }
    if opts.check_neighbors {
        if lo > 1 {
            eval(lo - 1, &mut seen)?;
        }
        if hi < opts.h_max {
            eval(hi + 1, &mut seen)?;
        }
    }
    let mut violations = 0;
    for (hf, rf) in &seen {
        for (hj, rj) in &seen {
            if hf < hj && not_jammed(rf) && !not_jammed(rj) {
                violations += 1;
            }
        }
    }
    let fit = &seen[&hi];
    let est = TransitionEstimate {
        protocol: "locate_transition".into(),
        p,
        seed,
        n_star: t.count(lo),
        h_star: lo,
        h_fit: hi,
        n_fit: fit.n,
        fit_n_delta: fit.n_delta,
        jam_n_delta_over_n: seen.get(&lo).map(|r| r.n_delta_over_n),
        saturated: lo == 0,
        runs: seen.len(),
        monotone_violations: violations,
    };
    Ok((est, seen.into_values().collect()))
}

/// [`locate_transition`] for every `(P, seed)`, pairs run in parallel.
pub fn locate_many(sweep: &Sweep, ps: &[usize], seeds: &[u64], opts: &LocateOptions) -> Result<(Vec<TransitionEstimate>, SweepResult)> {
    let pairs: Vec<(usize, u64)> = ps.iter().flat_map(|&p| seeds.iter().map(move |&s| (p, s))).collect();
    let inner = Sweep { jobs: 1, ..sweep.clone() };
    let found: Vec<_> = sweep.pool().install(|| pairs.par_iter().map(|&(p, s)| locate_transition(&inner, p, s, opts)).collect::<Result<_>>())?;
    let mut all = SweepResult::new("locate_transition");
    let mut est = Vec::new();
    for (e, rows) in found {
        est.push(e);
        for r in rows {
            all.insert(r)?;
        }
    }
    Ok((est, all))
}

/// Fixed architecture, `P` varied across the transition.
pub fn jump_scan(sweep: &Sweep, h: usize, ps: &[usize], seeds: &[u64]) -> Result<SweepResult> {
    let cells: Vec<_> = ps.iter().flat_map(|&p| seeds.iter().map(move |&s| (sweep.template, p, h, s))).collect();
    let mut res = SweepResult::new("jump_scan");
    for r in sweep.run_cells(&cells)? {
        res.insert(r)?;
    }
    Ok(res)
}

/// Fixed `P`, width varied; `n_star` fills the rescaled `N/N*` column.
pub fn generalization_sweep(sweep: &Sweep, p: usize, widths: &[usize], seeds: &[u64], n_star: Option<usize>) -> Result<SweepResult> {
    if sweep.data.spec(p, 0).p_test() == 0 {
        return Err(schema("generalization", "data.p_test", "a held-out set is required"));
    }
    let cells: Vec<_> = widths.iter().flat_map(|&h| seeds.iter().map(move |&s| (sweep.template, p, h, s))).collect();
    let mut res = SweepResult::new("generalization");
    for mut r in sweep.run_cells(&cells)? {
        r.n_over_n_star = n_star.map(|ns| r.n as f64 / ns as f64);
        res.insert(r)?;
    }
    Ok(res)
}

/// The same generalization sweep at several depths with shared data seeds.
pub fn depth_comparison(sweep: &Sweep, p: usize, depths: &[usize], widths: &[Vec<usize>], seeds: &[u64], n_star: &[Option<usize>]) -> Result<Vec<SweepResult>> {
    if widths.len() != depths.len() || n_star.len() != depths.len() {
        return Err(schema("depth_comparison", "widths", "one width list and one N* per depth"));
    }
    let mut out = Vec::new();
    for (i, &l) in depths.iter().enumerate() {
        let s = Sweep { template: sweep.template.with_depth(l), ..sweep.clone() };
        let mut r = generalization_sweep(&s, p, &widths[i], seeds, n_star[i])?;
        r.protocol = format!("depth_comparison_L{l}");
        out.push(r);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Protocol {
    LocateTransition {
        ps: Vec<usize>,
        options: LocateOptions,
    },
    JumpScan {
        h: usize,
        ps: Vec<usize>,
    },
    Generalization {
        p: usize,
        widths: Vec<usize>,
        #[serde(default)]
        n_star: Option<usize>,
    },
    DepthComparison {
        p: usize,
        depths: Vec<usize>,
        widths: Vec<Vec<usize>>,
        #[serde(default)]
        n_star: Vec<Option<usize>>,
    },
}

/// A sweep document: `jamlab sweep --config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub template: Template,
    pub data: DataSource,
    pub schedule: TrainSchedule,
    pub seeds: Vec<u64>,
    pub protocol: Protocol,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.seeds.is_empty() {
            return Err(schema("sweep", "seeds", "at least one seed"));
        }
        if self.template.depth == 0 || self.template.d == Some(0) {
            return Err(schema("sweep", "template", "L and d must be at least 1"));
        }
        Ok(())
    }
}

pub const RUNS_FILE: &str = "runs.csv";
pub const TRANSITIONS_FILE: &str = "transitions.csv";

/// Runs a sweep document into `dir`: result CSVs, per-cell files and a
/// manifest listing all of them.
pub fn run_sweep(config: &SweepConfig, dir: &Path, jobs: usize) -> Result<RunManifest> {
    config.validate()?;
    let mut mb = ManifestBuilder::new(dir, "sweep", config);
    let sweep = Sweep { out: Some(dir.to_path_buf()), jobs, ..Sweep::new(config.template, config.data.clone(), config.schedule.clone()) };
    let mut results: Vec<(String, SweepResult)> = Vec::new();
    match &config.protocol {
        Protocol::LocateTransition { ps, options } => {
            let (est, runs) = locate_many(&sweep, ps, &config.seeds, options)?;
            write_bytes(&dir.join(TRANSITIONS_FILE), &csv_bytes(&est))?;
            mb.output(TRANSITIONS_FILE);
            results.push((RUNS_FILE.into(), runs));
        }
        Protocol::JumpScan { h, ps } => results.push((RUNS_FILE.into(), jump_scan(&sweep, *h, ps, &config.seeds)?)),
        Protocol::Generalization { p, widths, n_star } => {
            results.push((RUNS_FILE.into(), generalization_sweep(&sweep, *p, widths, &config.seeds, *n_star)?))
        }
        Protocol::DepthComparison { p, depths, widths, n_star } => {
            let ns = if n_star.is_empty() { vec![None; depths.len()] } else { n_star.clone() };
            for (l, r) in depths.iter().zip(depth_comparison(&sweep, *p, depths, widths, &config.seeds, &ns)?) {
                results.push((format!("runs_L{l}.csv"), r));
            }
        }
    }
    for (name, r) in &results {
        write_bytes(&dir.join(name), &r.to_csv())?;
        mb.output(name.as_str());
        for row in &r.rows {
            if let Some(ck) = &row.checkpoint {
                let cell = Path::new(ck).parent().expect("cell directory");
                mb.output(cell.join(TRAJECTORY_FILE));
                mb.output(ck.as_str());
            }
            mb.runtime(row.runtime);
        }
    }
    mb.finish()
}
