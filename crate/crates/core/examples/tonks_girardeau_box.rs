//! Samples the trained hard-core box state in `tests/data` and compares its
//! density with the free-fermion profile.
//!
//! cargo run --release --example tonks_girardeau_box

use std::path::Path;

use bosefock::reference::tg_box_energy;
use bosefock::runner::{evaluate_checkpoint, RunConfig};

fn main() -> bosefock::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let cfg = RunConfig::load(&root.join("../../configs/tg_box.toml"))?;
    let ev = evaluate_checkpoint(Some(&cfg), &root.join("tests/data/tg_box.ckpt"), None)?;
    let r = &ev.report;
    let exact = tg_box_energy(8, 1.0) - cfg.model.mu * 8.0;
    println!("E = {:.2} ± {:.2} (exact {exact:.3}), <n> = {:.3}", r.energy, r.energy_stderr, r.mean_n);
    println!("rescaled variance {:.2e}", r.rescaled_variance);
    if let Some(chi2) = r.density_chi2_per_dof {
        println!("density chi2/dof vs free fermions: {chi2:.2}");
    }
    if let Some(oracle) = &ev.density_oracle {
        println!("\n{:>8} {:>10} {:>9} {:>10}", "x", "density", "stderr", "exact");
        for k in (0..oracle.len()).step_by(2) {
            println!(
                "{:>8.4} {:>10.4} {:>9.4} {:>10.4}",
                ev.density.centers[0][k], ev.density.value[k], ev.density.stderr[k], oracle[k]
            );
        }
    }
    Ok(())
}
