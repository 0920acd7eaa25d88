//! Trains the ring benchmark (g = 5, L = 5) from scratch for a few
//! iterations and compares a fresh evaluation with the exact ground state.
//! Pass an iteration count to train longer; the full schedule in
//! `configs/cs1d_g5.toml` takes about five minutes.
//!
//! cargo run --release --example cs1d_ring -- 40

use std::path::Path;

use bosefock::reference::cs1d_exact;
use bosefock::runner::{evaluate_checkpoint, optimize, RunConfig};

fn main() -> bosefock::Result<()> {
    let iterations = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(40);
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let mut cfg = RunConfig::load(&root.join("../../configs/cs1d_g5.toml"))?;
    cfg.optimizer.iterations = iterations;
    cfg.out_dir = std::env::temp_dir().join("bosefock-cs1d-ring");

    let run = optimize(&cfg, None)?;
    for r in run.records.iter().step_by((iterations / 8).max(1)) {
        println!("iter {:>4}  E = {:>10.4} ± {:.3}  <n> = {:.3}", r.iter, r.energy, r.energy_stderr, r.mean_n);
    }

    let ev = evaluate_checkpoint(Some(&cfg), &run.checkpoint, None)?;
    let exact = cs1d_exact(5.0)?;
    let r = &ev.report;
    println!("\nevaluation: E = {:.4} ± {:.4}, <n> = {:.3}", r.energy, r.energy_stderr, r.mean_n);
    println!("exact:      E = {:.4} at N = {:?}", exact.energy, exact.n0);
    println!("P(n): {:?}", r.n_distribution.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>());
    if let Some(obdm) = &ev.obdm {
        println!("\n{:>8} {:>10}", "s", "g1(s)");
        for (s, v) in obdm.s.iter().zip(&obdm.value).step_by(8) {
            println!("{s:>8.3} {v:>10.4}");
        }
    }
    Ok(())
}
