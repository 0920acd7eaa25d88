mod common;

use bosefock::geometry::Configuration;
use common::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn shuffled(c: &Configuration, rng: &mut rand_chacha::ChaCha8Rng) -> (Configuration, Vec<usize>) {
    let mut perm: Vec<usize> = (0..c.n()).collect();
    perm.shuffle(rng);
    (c.permuted(&perm), perm)
}

#[test]
fn log_amplitude_is_permutation_invariant() {
    let mut rng = rng(17);
    let fixtures = fixtures();
    for k in 0..200 {
        let (name, model, ansatz) = &fixtures[k % fixtures.len()];
        let params = generic_params(ansatz, k as u64);
        let n = rng.gen_range(2..=6);
        let c = random_config(model, n, 0.05, &mut rng);
        let (p, _) = shuffled(&c, &mut rng);
        let a = ansatz.log_amplitude(&params, &c).unwrap().finite().unwrap();
        let b = ansatz.log_amplitude(&params, &p).unwrap().finite().unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{name}: {a} vs {b}");
    }
}

#[test]
fn derivatives_are_permutation_covariant() {
    let mut rng = rng(18);
    for (name, model, ansatz) in fixtures() {
        let params = generic_params(&ansatz, 5);
        let d = model.dim();
        for _ in 0..10 {
            let c = random_config(&model, 5, 0.05, &mut rng);
            let (p, perm) = shuffled(&c, &mut rng);
            let a = ansatz.differentiate(&params, &c, false).unwrap();
            let b = ansatz.differentiate(&params, &p, false).unwrap();
            let scale = a.coord_laplacian.abs().max(1.0);
            assert!((a.coord_laplacian - b.coord_laplacian).abs() <= 1e-12 * scale, "{name}");
            for (i, &src) in perm.iter().enumerate() {
                for k in 0..d {
                    let (x, y) = (b.coord_grad[i * d + k], a.coord_grad[src * d + k]);
                    assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{name}: {x} vs {y}");
                }
            }
        }
    }
}

#[test]
fn padding_rows_are_ignored() {
    let mut rng = rng(19);
    for (name, model, ansatz) in fixtures() {
        let params = generic_params(&ansatz, 7);
        for n in 0..=ansatz.hyper().n_max {
            let c = random_config(&model, n, 0.05, &mut rng);
            let compact = ansatz.network_log_amp(&params, &c).unwrap();
            let mut padded = ansatz.embed(&c).unwrap();
            let zero_pad = ansatz.network_log_amp_padded(&params, &padded, n).unwrap();
            for i in n..padded.rows() {
                for v in padded.row_mut(i) {
                    *v = rng.gen_range(-50.0..50.0);
                }
            }
            let junk_pad = ansatz.network_log_amp_padded(&params, &padded, n).unwrap();
            let tol = 1e-12 * compact.abs().max(1.0);
            assert!((compact - zero_pad).abs() <= tol, "{name} n={n}: {compact} vs {zero_pad}");
            assert!((compact - junk_pad).abs() <= tol, "{name} n={n}: {compact} vs {junk_pad}");
        }
    }
}

/// The network sees absolute positions, so only the analytic part of the
/// ansatz is translation invariant; the head is zeroed to isolate it.
#[test]
fn ring_local_energy_is_translation_invariant() {
    let mut rng = rng(20);
    let (_, model, ansatz) = fixtures().into_iter().find(|(n, _, _)| *n == "cs1d").unwrap();
    let mut params = generic_params(&ansatz, 9);
    zero_head(&ansatz, &mut params);
    let l = model.extent;
    for _ in 0..50 {
        let c = random_config(&model, rng.gen_range(1..=6), 0.05, &mut rng);
        let shift = rng.gen_range(-2.0 * l..2.0 * l);
        let mut s = c.clone();
        for x in s.coords_mut() {
            *x = model.domain().wrap(*x + shift);
        }
        let e = |c: &Configuration| {
            let d = ansatz.differentiate(&params, c, false).unwrap();
            model.local_energy(&d, c).unwrap()
        };
        let (a, b) = (e(&c), e(&s));
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{a} vs {b}");
        let (va, vb) = (model.potential_energy(&c).unwrap(), model.potential_energy(&s).unwrap());
        assert!((va - vb).abs() <= 1e-10 * va.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn permutation_invariance_holds_for_any_seed(seed in any::<u64>(), n in 2usize..=6) {
        let mut rng = rng(seed);
        for (_, model, ansatz) in fixtures() {
            let params = generic_params(&ansatz, seed);
            let c = random_config(&model, n, 0.05, &mut rng);
            let (p, _) = shuffled(&c, &mut rng);
            let a = ansatz.log_amplitude(&params, &c).unwrap().finite().unwrap();
            let b = ansatz.log_amplitude(&params, &p).unwrap().finite().unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}
