use bosefock::numerics::Matrix;
use bosefock::optimizer::{energy_gradient, minsr_update, sr_update, CenteredStats};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64, ns: usize, np: usize) -> CenteredStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e: Vec<f64> = (0..ns).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let o = Matrix::from_vec(ns, np, (0..ns * np).map(|_| rng.gen_range(-1.0..1.0)).collect());
    CenteredStats::new(&e, &o).unwrap()
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    d / b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn minsr_equals_sr_without_shift(seed in any::<u64>(), np in 2usize..12, extra in 1usize..20) {
        let stats = instance(seed, np + extra, np);
        let a = minsr_update(&stats, 0.1, Some(0.0), None).unwrap();
        let b = sr_update(&stats, 0.1, Some(0.0), None).unwrap();
        prop_assert!(rel(&a, &b) <= 1e-8, "{}", rel(&a, &b));
    }

    #[test]
    fn minsr_equals_sr_with_equal_shift(seed in any::<u64>(), ns in 2usize..20, np in 2usize..20) {
        // (ŌᵀŌ + s)⁻¹Ōᵀ = Ōᵀ(ŌŌᵀ + s)⁻¹ for any s > 0
        let stats = instance(seed, ns, np);
        let a = minsr_update(&stats, 0.1, Some(1e-3), None).unwrap();
        let b = sr_update(&stats, 0.1, Some(1e-3), None).unwrap();
        prop_assert!(rel(&a, &b) <= 1e-8, "{}", rel(&a, &b));
    }

    #[test]
    fn centered_columns_have_zero_mean(seed in any::<u64>(), ns in 2usize..30, np in 1usize..8) {
        let stats = instance(seed, ns, np);
        for j in 0..np {
            let col: Vec<f64> = (0..ns).map(|i| stats.o_bar.get(i, j)).collect();
            let mean = col.iter().sum::<f64>() / ns as f64;
            let sd = (col.iter().map(|v| v * v).sum::<f64>() / ns as f64).sqrt();
            prop_assert!(mean.abs() <= 1e-12 * sd.max(1e-300));
        }
        prop_assert!(stats.eps_bar.iter().sum::<f64>().abs() <= 1e-12 * ns as f64);
    }

    #[test]
    fn update_is_linear_in_learning_rate(seed in any::<u64>()) {
        let stats = instance(seed, 12, 5);
        let a = minsr_update(&stats, 0.05, None, None).unwrap();
        let b = minsr_update(&stats, 0.1, None, None).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((2.0 * x - y).abs() <= 1e-14 * y.abs().max(1e-300));
        }
    }

    #[test]
    fn kernel_is_positive_semidefinite(seed in any::<u64>(), ns in 2usize..16, np in 1usize..16) {
        let t = instance(seed, ns, np).kernel();
        let eig = nalgebra::DMatrix::from_fn(ns, ns, |i, j| t.get(i, j)).symmetric_eigen();
        prop_assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-10));
    }
}

#[test]
fn zero_energy_spread_gives_zero_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let o = Matrix::from_vec(8, 3, (0..24).map(|_| rng.gen::<f64>()).collect());
    let stats = CenteredStats::new(&[2.5; 8], &o).unwrap();
    assert!(energy_gradient(&stats).iter().all(|&g| g == 0.0));
    assert!(minsr_update(&stats, 0.1, None, None).unwrap().iter().all(|&d| d == 0.0));
}
