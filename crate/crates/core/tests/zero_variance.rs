//! The Sutherland product state is the exact ring ground state in every
//! particle-number sector, so with the network head zeroed the local energy
//! is constant and the optimizer must not move.

mod common;

use bosefock::ansatz::{Ansatz, EmbeddingKind};
use bosefock::models::ModelSpec;
use bosefock::optimizer::{energy_gradient, evaluate_batch, minsr_update, CenteredStats};
use bosefock::reference::cs1d_energy;
use bosefock::runner::FactorsConfig;
use common::*;

#[test]
fn local_energy_is_constant_in_each_sector() {
    for g in [1.0, 5.0, 30.0] {
        let (model, ansatz, params) = sutherland_state(g);
        for n in 1..=8 {
            let batch = fixed_n_batch(&model, n, 100, n as u64);
            let e = evaluate_batch(&model, &ansatz, &params, &batch, false).unwrap().local_energies;
            let mean = e.iter().sum::<f64>() / e.len() as f64;
            let sd = (e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / e.len() as f64).sqrt();
            let exact = cs1d_energy(n, 5.0, g) - model.mu * n as f64;
            assert!(sd <= 1e-8 * mean.abs(), "g={g} n={n}: sd {sd:e}, mean {mean}");
            assert!((mean - exact).abs() <= 1e-8 * exact.abs(), "g={g} n={n}: {mean} vs {exact}");
        }
    }
}

#[test]
fn exact_state_does_not_drift() {
    let (model, ansatz, params) = sutherland_state(5.0);
    let batch = fixed_n_batch(&model, 5, 64, 9);
    let ev = evaluate_batch(&model, &ansatz, &params, &batch, true).unwrap();
    let stats = CenteredStats::new(&ev.local_energies, &ev.o).unwrap();
    let g: f64 = energy_gradient(&stats).iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(g <= 1e-6 * params.norm(), "gradient norm {g:e}");
    let step: f64 = minsr_update(&stats, 0.01, None, None)
        .unwrap()
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    assert!(step <= 1e-6 * params.norm(), "step norm {step:e}");
}

#[test]
fn trapped_product_state_is_exact_in_two_dimensions() {
    use bosefock::reference::cs2d_energy;
    for g in [2.0, 5.0] {
        let model = ModelSpec::cs2d(10.0, g, 1.0, 22.0);
        let factors = FactorsConfig {
            envelope: Some(model.omega()),
            window: false,
            ..FactorsConfig::default()
        }
        .resolve(&model)
        .unwrap();
        let ansatz = Ansatz::new(hyper(EmbeddingKind::Gaussian, 4, 2, 8), factors, model.domain()).unwrap();
        let mut params = generic_params(&ansatz, 4);
        zero_head(&ansatz, &mut params);
        let off = ansatz.layout().envelope_offset.unwrap();
        params.as_mut_slice()[off] = model.omega().ln();
        for n in 1..=8 {
            let batch = fixed_n_batch(&model, n, 100, 40 + n as u64);
            let e = evaluate_batch(&model, &ansatz, &params, &batch, false).unwrap().local_energies;
            let mean = e.iter().sum::<f64>() / e.len() as f64;
            let sd = (e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / e.len() as f64).sqrt();
            let exact = cs2d_energy(n, g, 1.0) - model.mu * n as f64;
            assert!(sd <= 1e-8 * mean.abs(), "g={g} n={n}: sd {sd:e}, mean {mean}, exact {exact}");
            assert!((mean - exact).abs() <= 1e-8 * exact.abs(), "g={g} n={n}: {mean} vs {exact}");
        }
    }
}
