//! Exact derivatives of `ln φ` against central differences for a small
//! ring ansatz.
//!
//! cargo run --release --example derivatives

use bosefock::ansatz::{Activation, Ansatz, AnsatzHyper, EmbeddingKind};
use bosefock::geometry::Configuration;
use bosefock::models::ModelSpec;
use bosefock::runner::FactorsConfig;

fn main() -> bosefock::Result<()> {
    let model = ModelSpec::cs1d(5.0, 5.0, 46.0);
    let hyper = AnsatzHyper {
        embed_dim: 8,
        blocks: 1,
        heads: 2,
        ffn_width: 8,
        n_max: 6,
        embedding: EmbeddingKind::Fourier,
        grid_points: 4,
        sigma: None,
        activation: Activation::LogCosh,
    };
    let ansatz = Ansatz::new(hyper, FactorsConfig::default().resolve(&model)?, model.domain())?;
    let params = ansatz.init_params(1);
    let config = Configuration::new(1, vec![0.3, 1.4, 2.2, 3.9])?;

    let d = ansatz.differentiate(&params, &config, true)?;
    let f = |c: &Configuration| ansatz.log_amplitude(&params, c).map(|v| v.ln());
    println!("ln phi = {:.12}  ({} parameters)", d.value, params.len());

    let h = 1e-5;
    println!("\n{:>4} {:>18} {:>18}", "k", "exact d/dx_k", "central diff");
    for k in 0..config.coords().len() {
        let mut up = config.clone();
        let mut down = config.clone();
        up.coords_mut()[k] += h;
        down.coords_mut()[k] -= h;
        println!("{k:>4} {:>18.10} {:>18.10}", d.coord_grad[k], (f(&up)? - f(&down)?) / (2.0 * h));
    }

    let h = 1e-3;
    let f0 = f(&config)?;
    let mut lap = 0.0;
    for k in 0..config.coords().len() {
        let mut up = config.clone();
        let mut down = config.clone();
        up.coords_mut()[k] += h;
        down.coords_mut()[k] -= h;
        lap += (f(&up)? - 2.0 * f0 + f(&down)?) / (h * h);
    }
    println!("\nlaplacian: exact {:.8}, finite differences {:.8}", d.coord_laplacian, lap);

    let e = model.local_energy(&d, &config)?;
    println!("local grand energy E_loc - mu n = {e:.6}");
    Ok(())
}
