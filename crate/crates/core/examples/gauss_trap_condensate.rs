//! Grand-canonical ground state of trapped bosons with a weak Gaussian
//! interaction (μ = 2, g = 2, range 0.5) and its condensate fraction from
//! the projected one-body density matrix.
//!
//! cargo run --release --example gauss_trap_condensate -- 60

use std::path::Path;

use bosefock::runner::{evaluate_checkpoint, optimize, RunConfig};

fn main() -> bosefock::Result<()> {
    let iterations = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(60);
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let mut cfg = RunConfig::load(&root.join("../../configs/gauss_mu2_g2.toml"))?;
    cfg.optimizer.iterations = iterations;
    cfg.out_dir = std::env::temp_dir().join("bosefock-gauss-trap");

    let run = optimize(&cfg, None)?;
    let last = run.records.last().expect("at least one iteration");
    println!("after {iterations} iterations: E = {:.4} ± {:.4}, <n> = {:.3}", last.energy, last.energy_stderr, last.mean_n);

    let ev = evaluate_checkpoint(Some(&cfg), &run.checkpoint, None)?;
    let r = &ev.report;
    println!("evaluation: E = {:.4} ± {:.4}, <n> = {:.3}", r.energy, r.energy_stderr, r.mean_n);
    println!("P(n): {:?}", r.n_distribution.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>());
    if let (Some(cf), Some(p)) = (r.condensate_fraction, &ev.projected) {
        println!("condensate fraction {cf:.3} (trace {:.3} ± {:.3})", p.trace, p.trace_stderr);
    }
    Ok(())
}
