use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use jamlab::config::{load_train_config, read_json};
use jamlab::io::{load_checkpoint, load_dataset, write_bytes, write_csv, write_json};
use jamlab::manifest::{self, config_hash, sha256_hex, ManifestBuilder};
use jamlab::reports::{cusp_bundle, neff_row, spectrum_bundle};
use jamlab::runs::{rerun_and_compare, train_run};
use jamlab::sweeps::{run_sweep, SweepConfig};
use serde::Serialize;

#[global_allocator]
static ALLOC: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(name = "jamlab", version, about = "Jamming-transition experiments on fully-connected networks")]
struct Cli {
    /// Output directory; defaults to `$JAMLAB_OUT/<kind>-<hash>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one network from a JSON config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Replaces every seed in the config with ones derived from this.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a sweep document.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Runs this single seed instead of the config's list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Hessian spectra (H_L, H0, Hp), odd traces and stability bounds.
    Spectrum {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Effective dimension of one or more checkpoints on a dataset.
    Neff {
        #[arg(long, required = true)]
        checkpoint: Vec<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Cusp counts and pre-activation histograms.
    Cusps {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long, default_value_t = 60)]
        bins: usize,
    },
    /// Render a figure from result files.
    Plot {
        #[arg(long)]
        figure: String,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Re-hash the outputs listed in manifests.
    Verify {
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        /// Also re-execute each run here and compare its CSVs byte for byte.
        #[arg(long)]
        rerun: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn out_dir(explicit: &Option<PathBuf>, kind: &str, hash: &str) -> PathBuf {
    if let Some(d) = explicit {
        return d.clone();
    }
    let root = std::env::var_os("JAMLAB_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    root.join(format!("{kind}-{}", &hash[..12]))
}

fn input_hash(paths: &[&Path]) -> anyhow::Result<String> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(sha256_hex(&std::fs::read(p).with_context(|| p.display().to_string())?).into_bytes());
    }
    Ok(sha256_hex(&all))
}

#[derive(Serialize)]
struct Inputs<'a> {
    command: &'a str,
    inputs: Vec<String>,
    input_hash: String,
}

fn inputs_doc<'a>(command: &'a str, paths: &[&Path]) -> anyhow::Result<Inputs<'a>> {
    Ok(Inputs { command, inputs: paths.iter().map(|p| p.display().to_string()).collect(), input_hash: input_hash(paths)? })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Train { config, seed } => {
            let mut c = load_train_config(&config)?;
            if let Some(s) = seed {
                c.reseed(s);
            }
            let dir = out_dir(&cli.out, "train", &config_hash(&c));
            let (out, _) = train_run(&c, &dir)?;
            let last = out.trajectory.last();
            println!("{}: {} steps, loss {:e}, N_delta {}, {}", dir.display(), out.trajectory.steps_run, last.loss, last.n_delta, out.trajectory.stop);
        }
        Cmd::Sweep { config, seed, jobs } => {
            let mut c: SweepConfig = read_json(&config)?;
            if let Some(s) = seed {
                c.seeds = vec![s];
            }
            let dir = out_dir(&cli.out, "sweep", &config_hash(&c));
            let m = run_sweep(&c, &dir, jobs)?;
            println!("{}: {} files", dir.display(), m.outputs.len());
        }
        Cmd::Spectrum { checkpoint, dataset } => {
            let doc = inputs_doc("spectrum", &[&checkpoint, &dataset])?;
            let dir = out_dir(&cli.out, "spectrum", &doc.input_hash);
            let mut mb = ManifestBuilder::new(&dir, "spectrum", &doc);
            let (params, data) = (load_checkpoint(&checkpoint)?, load_dataset(&dataset)?);
            mb.dataset(&data);
            let b = spectrum_bundle(&params, &data)?;
            write_json(&dir.join("spectrum.json"), &b)?;
            #[derive(Serialize)]
            struct Eig {
                index: usize,
                h_l: f64,
                h0: f64,
                hp: f64,
            }
            let rows: Vec<Eig> = (0..b.n)
                .map(|i| Eig { index: i, h_l: b.hessian.eigenvalues[i], h0: b.h0.eigenvalues[i], hp: b.hp.eigenvalues[i] })
                .collect();
            write_csv(&dir.join("eigenvalues.csv"), &rows)?;
            mb.output("spectrum.json");
            mb.output("eigenvalues.csv");
            mb.finish()?;
            println!("{}: N_minus(Hp) = {}, C0 = {:.4}", dir.display(), b.hp.n_minus, b.hp.c0_hat);
        }
        Cmd::Neff { checkpoint, dataset } => {
            let mut all: Vec<&Path> = checkpoint.iter().map(|p| p.as_path()).collect();
            all.push(&dataset);
            let doc = inputs_doc("neff", &all)?;
            let dir = out_dir(&cli.out, "neff", &doc.input_hash);
            let mut mb = ManifestBuilder::new(&dir, "neff", &doc);
            let data = load_dataset(&dataset)?;
            mb.dataset(&data);
            let mut rows = Vec::new();
            let mut full = Vec::new();
            for ck in &checkpoint {
                let (row, e) = neff_row(&load_checkpoint(ck)?, &data)?;
                println!("{}: N = {}, N_eff = {}, N - neurons = {}", ck.display(), row.n, row.n_eff, row.n_minus_neurons);
                rows.push(row);
                full.push(e);
            }
            write_csv(&dir.join("neff.csv"), &rows)?;
            write_json(&dir.join("neff.json"), &full)?;
            mb.output("neff.csv");
            mb.output("neff.json");
            mb.finish()?;
        }
        Cmd::Cusps { checkpoint, dataset, test, bins } => {
            let mut all: Vec<&Path> = vec![&checkpoint, &dataset];
            if let Some(t) = &test {
                all.push(t);
            }
            let doc = inputs_doc("cusps", &all)?;
            let dir = out_dir(&cli.out, "cusps", &doc.input_hash);
            let mut mb = ManifestBuilder::new(&dir, "cusps", &doc);
            let params = load_checkpoint(&checkpoint)?;
            let train = load_dataset(&dataset)?;
            mb.dataset(&train);
            let test = test.as_deref().map(load_dataset).transpose()?;
            if let Some(t) = &test {
                mb.dataset(t);
            }
            let b = cusp_bundle(&params, &train, test.as_ref(), bins)?;
            write_json(&dir.join("cusps.json"), &b)?;
            write_json(&dir.join("histograms.json"), &b.histograms)?;
            mb.output("cusps.json");
            mb.output("histograms.json");
            mb.finish()?;
            for r in &b.train {
                println!("eps_rel {:e}: N_c = {} (beta {:.3}), neurons {}", r.eps_rel, r.n_c, r.beta_hat, r.n_c_neurons);
            }
        }
        Cmd::Plot { figure, inputs } => {
            if !jamlab::plot::FIGURES.contains(&figure.as_str()) {
                bail!("unknown figure id `{figure}` (known: {})", jamlab::plot::FIGURES.join(", "));
            }
            let svg = jamlab::plot::figure(&figure, &inputs)?;
            let refs: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
            let doc = inputs_doc("plot", &refs)?;
            let dir = out_dir(&cli.out, &format!("plot-{figure}"), &doc.input_hash);
            let mut mb = ManifestBuilder::new(&dir, "plot", &doc);
            let name = format!("{figure}.svg");
            write_bytes(&dir.join(&name), svg.as_bytes())?;
            mb.output(name.as_str());
            mb.finish()?;
            println!("{}", dir.join(name).display());
        }
        Cmd::Verify { manifests, rerun, jobs } => {
            let mut failed = 0;
            for (i, m) in manifests.iter().enumerate() {
                let res = manifest::verify(m).and_then(|mf| match &rerun {
                    Some(root) if matches!(mf.kind.as_str(), "train" | "sweep") => rerun_and_compare(m, &root.join(format!("{i}-{}", mf.run_id)), jobs).map(|n| format!("{} files hashed, {n} CSVs re-executed identically", mf.outputs.len())),
                    _ => Ok(format!("{} files hashed", mf.outputs.len())),
                });
                match res {
                    Ok(msg) => println!("ok   {}: {msg}", m.display()),
                    Err(e) => {
                        failed += 1;
                        println!("FAIL {}: {e}", m.display());
                    }
                }
            }
            if failed > 0 {
                bail!("{failed} of {} manifests failed", manifests.len());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
