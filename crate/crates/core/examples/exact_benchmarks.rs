//! Prints the cataloged ground states and the grand-canonical minimizer of
//! each closed form.
//!
//! cargo run --example exact_benchmarks

use std::f64::consts::PI;

use bosefock::reference::{catalog, cs1d_energy, grand_minimizer, tg_box_energy};

fn main() -> bosefock::Result<()> {
    println!("{:<16} {:>12} {:>12} {:>8}", "benchmark", "E0", "published", "N0");
    for b in catalog() {
        let n0: Vec<String> = b.n0.iter().map(|n| n.to_string()).collect();
        let published = b.published_energy.map_or("-".to_string(), |e| format!("{e:.3}"));
        println!("{:<16} {:>12.4} {:>12} {:>8}", b.name, b.energy, published, n0.join("/"));
    }

    // E(N) - μN over N for the hard-core box at μ = (8.75π)²
    let mu = (8.75 * PI).powi(2);
    println!("\nTonks-Girardeau box, mu = {mu:.3}");
    for n in 6..=10 {
        println!("  N = {n:>2}: E - mu N = {:>10.3}", tg_box_energy(n, 1.0) - mu * n as f64);
    }
    let m = grand_minimizer(|n| tg_box_energy(n, 1.0), mu, 30)?;
    println!("  minimum at N = {:?}, {:.4} = -408.5 pi^2", m.argmin, m.energy);

    let m = grand_minimizer(|n| cs1d_energy(n, 5.0, 5.0), 45.975700517094936, 30)?;
    println!("\nring, g = 5: minimum at N = {:?}, E = {:.4}", m.argmin, m.energy);
    Ok(())
}
