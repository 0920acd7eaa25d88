//! Samples the trained 2D inverse-square trap state (g = 2, μ = 22) and
//! prints the radial density against the exact profile and the occupations
//! of the leading natural orbitals.
//!
//! cargo run --release --example cs2d_trap

use std::path::Path;

use bosefock::numerics::symmetric_eigen;
use bosefock::runner::{evaluate_checkpoint, RunConfig};

fn main() -> bosefock::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let cfg = RunConfig::load(&root.join("../../configs/cs2d_g2.toml"))?;
    let ev = evaluate_checkpoint(Some(&cfg), &root.join("tests/data/cs2d_g2.ckpt"), None)?;
    let r = &ev.report;
    println!("E = {:.3} ± {:.3} (exact -110), <n> = {:.3} (exact 10 or 11)", r.energy, r.energy_stderr, r.mean_n);

    if let Some(oracle) = &ev.density_oracle {
        println!("\n{:>6} {:>10} {:>9} {:>10}", "r", "n(r)", "stderr", "exact");
        for k in (0..oracle.len()).step_by(3) {
            println!(
                "{:>6.2} {:>10.4} {:>9.4} {:>10.4}",
                ev.density.centers[0][k], ev.density.value[k], ev.density.stderr[k], oracle[k]
            );
        }
        println!("chi2/dof {:.2}", r.density_chi2_per_dof.unwrap_or(f64::NAN));
    }

    if let Some(p) = &ev.projected {
        let (vals, _) = symmetric_eigen(&p.matrix);
        let top: Vec<String> = vals.iter().rev().take(6).map(|v| format!("{v:.3}")).collect();
        println!("\nprojected OBDM: {} orbitals, trace {:.2} ± {:.2}", p.basis.len(), p.trace, p.trace_stderr);
        println!("largest occupations: {}", top.join(", "));
        println!("condensate fraction {:.3}", r.condensate_fraction.unwrap_or(f64::NAN));
    }
    Ok(())
}
