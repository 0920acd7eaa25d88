use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::reference::catalog;
use crate::sampler::validation::standard_suite;

use super::{evaluate, optimize, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "bosefock", version, about = "Grand-canonical neural VMC for continuum bosons")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a wavefunction; writes trajectory.csv and checkpoint.ckpt.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Resume from this checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        iterations_override: Option<usize>,
        #[arg(long)]
        chains_override: Option<usize>,
    },
    /// Sample a checkpoint; writes density.csv, obdm.csv and summary.json.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        chains_override: Option<usize>,
    },
    /// Exact reference values.
    Bench {
        #[command(subcommand)]
        action: BenchAction,
    },
    /// Checks the sampler against trial states with known number laws.
    SampleCheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum BenchAction {
    List,
    /// Compares the closed forms with the published values; `filter`
    /// selects entries by name prefix.
    Check { filter: Option<String> },
}

fn init_threads() {
    if let Some(n) = std::env::var("BOSEFOCK_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn load_config(
    path: &PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    iterations: Option<usize>,
    chains: Option<usize>,
) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    if let Some(i) = iterations {
        cfg.optimizer.iterations = i;
    }
    if let Some(c) = chains {
        cfg.sampler.chains = c;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn bench(action: BenchAction) -> Result<bool> {
    let entries = catalog();
    match action {
        BenchAction::List => {
            println!("{:<16} {:<13} {:>10} {:>8} {:>14} {:>8}", "name", "model", "mu", "g", "E0", "n0");
            for b in &entries {
                let n0: Vec<String> = b.n0.iter().map(|n| n.to_string()).collect();
                println!(
                    "{:<16} {:<13} {:>10.4} {:>8} {:>14.4} {:>8}",
                    b.name,
                    format!("{:?}", b.model.kind),
                    b.model.mu,
                    b.model.g,
                    b.energy,
                    n0.join("/")
                );
            }
            Ok(true)
        }
        BenchAction::Check { filter } => {
            let mut all = true;
            let mut any = false;
            for b in entries.iter().filter(|b| filter.as_deref().map_or(true, |f| b.name.starts_with(f))) {
                any = true;
                let Some(published) = b.published_energy else {
                    println!("{:<16} E0 = {:.4} (no published value)", b.name, b.energy);
                    continue;
                };
                let tol = 5e-5 * published.abs() + 5e-3;
                let ok = (b.energy - published).abs() <= tol;
                all &= ok;
                println!(
                    "{:<16} oracle {:>12.4}  published {:>12.4}  {}",
                    b.name,
                    b.energy,
                    published,
                    if ok { "PASS" } else { "FAIL" }
                );
            }
            if !any {
                return Err(Error::Uncataloged(filter.unwrap_or_default()));
            }
            Ok(all)
        }
    }
}

/// Runs the command line; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_threads();
    match dispatch(cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Optimize {
            config,
            seed,
            checkpoint,
            out,
            iterations_override,
            chains_override,
        } => {
            let cfg = load_config(&config, seed, out, iterations_override, chains_override)?;
            let outcome = optimize(&cfg, checkpoint.as_deref())?;
            if let Some(last) = outcome.records.last() {
                println!(
                    "iteration {}: E = {:.6} ± {:.2e}, <n> = {:.3}",
                    last.iter, last.energy, last.energy_stderr, last.mean_n
                );
            }
            println!("trajectory: {}", outcome.trajectory.display());
            println!("checkpoint: {}", outcome.checkpoint.display());
            Ok(true)
        }
        Command::Evaluate {
            checkpoint,
            config,
            seed,
            out,
            chains_override,
        } => {
            if !checkpoint.exists() {
                return Err(Error::CheckpointNotFound(checkpoint));
            }
            let cfg = config
                .as_ref()
                .map(|p| load_config(p, seed, None, None, chains_override))
                .transpose()?;
            let out = out
                .or_else(|| cfg.as_ref().map(|c| c.out_dir.clone()))
                .unwrap_or_else(|| checkpoint.parent().map(PathBuf::from).unwrap_or_default());
            let r = evaluate(cfg.as_ref(), &checkpoint, &out, seed)?;
            println!(
                "E = {:.6} ± {:.2e}, <n> = {:.4} ± {:.2e}, rescaled variance = {:.3e}",
                r.energy, r.energy_stderr, r.mean_n, r.stderr_n, r.rescaled_variance
            );
            if let Some(x) = &r.exact {
                match x.relative_error {
                    Some(rel) => println!("exact {}: E0 = {:.4}, relative error {rel:.2e}", x.name, x.energy),
                    None => println!("exact {}: E0 = {:.4}, absolute error {:.2e}", x.name, x.energy, x.absolute_error),
                }
            }
            if let Some(cf) = r.condensate_fraction {
                println!("condensate fraction = {cf:.4} ± {:.4}", r.condensate_fraction_stderr.unwrap_or(0.0));
            }
            println!("outputs: {}", out.display());
            Ok(true)
        }
        Command::Bench { action } => bench(action),
        Command::SampleCheck { seed } => {
            let mut ok = true;
            for r in standard_suite(seed)? {
                let pass = r.passes(0.01);
                ok &= pass;
                println!(
                    "{:<12} samples {:>7}  chi2 {:>8.2} / {:>2} dof  p = {:.4}  {}",
                    r.name,
                    r.samples,
                    r.chi2,
                    r.dof,
                    r.p_value,
                    if pass { "PASS" } else { "FAIL" }
                );
            }
            Ok(ok)
        }
    }
}
