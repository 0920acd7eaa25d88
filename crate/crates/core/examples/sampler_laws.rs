//! Runs the Fock-space sampler on trial states whose particle-number law is
//! known in closed form and reports the chi-square test of each.
//!
//! cargo run --release --example sampler_laws

use bosefock::sampler::validation::{geometric_law, law_settings, standard_suite, three_state_law};

fn main() -> bosefock::Result<()> {
    for r in standard_suite(1)? {
        println!(
            "{:<12} {:>7} samples  chi2 {:>7.2} / {:>2} dof  p = {:.3}",
            r.name, r.samples, r.chi2, r.dof, r.p_value
        );
    }

    // the histogram against the law, for a short geometric run in 2D
    let r = geometric_law(0.3, 3.0, 2, 40, law_settings(20, 500, 20), 2)?;
    let total: u64 = r.counts.iter().sum();
    println!("\ngeometric law, alpha^2 L^d = 0.81");
    for (n, (&c, &p)) in r.counts.iter().zip(&r.expected).enumerate().take(8) {
        println!("  n = {n}: observed {:.4}  expected {:.4}", c as f64 / total as f64, p);
    }

    let r = three_state_law([1.0, 0.4, 2.0], 1.0, law_settings(50, 400, 5), 3)?;
    println!("\nthree-state chain: p = {:.3}", r.p_value);
    Ok(())
}
