#![allow(dead_code)]

use bosefock::ansatz::{Activation, Ansatz, AnsatzHyper, AnsatzParams, EmbeddingKind, Jastrow};
use bosefock::geometry::Configuration;
use bosefock::models::ModelSpec;
use bosefock::runner::FactorsConfig;
use bosefock::sampler::{Acceptance, Sample, SampleBatch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn hyper(embedding: EmbeddingKind, grid_points: usize, dim: usize, n_max: usize) -> AnsatzHyper {
    let embed_dim = match embedding {
        EmbeddingKind::Gaussian => grid_points.pow(dim as u32),
        EmbeddingKind::Fourier => 2 * grid_points * dim,
    };
    AnsatzHyper {
        embed_dim,
        blocks: 2,
        heads: 2,
        ffn_width: 6,
        n_max,
        embedding,
        grid_points,
        sigma: None,
        activation: Activation::LogCosh,
    }
}

/// A small ansatz per model family, with its natural factors.
pub fn fixtures() -> Vec<(&'static str, ModelSpec, Ansatz)> {
    let models = [
        ("lieb-liniger", ModelSpec::lieb_liniger(1.0, 10.0, 50.0), EmbeddingKind::Gaussian, 8),
        ("cs1d", ModelSpec::cs1d(5.0, 5.0, 46.0), EmbeddingKind::Fourier, 4),
        ("cs2d", ModelSpec::cs2d(10.0, 2.0, 1.0, 22.0), EmbeddingKind::Gaussian, 4),
        ("gauss-trap", ModelSpec::gauss_trap(10.0, 2.0, 0.5, 1.0, 2.0), EmbeddingKind::Gaussian, 4),
    ];
    models
        .into_iter()
        .map(|(name, model, emb, grid)| {
            let factors = FactorsConfig {
                envelope: model.is_trapped().then_some(1.0),
                ..FactorsConfig::default()
            }
            .resolve(&model)
            .unwrap();
            let ansatz = Ansatz::new(hyper(emb, grid, model.dim(), 6), factors, model.domain()).unwrap();
            (name, model, ansatz)
        })
        .collect()
}

/// Initial parameters with every entry jittered, so no gain, bias or
/// pooling weight sits at a special value.
pub fn generic_params(ansatz: &Ansatz, seed: u64) -> AnsatzParams {
    let mut p = ansatz.init_params(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for v in p.as_mut_slice() {
        *v += rng.gen_range(-0.3..0.3);
    }
    p
}

/// Configuration with `n` particles, none closer than `min_sep` to another or
/// to a wall. Trapped particles stay within two oscillator lengths.
pub fn random_config(model: &ModelSpec, n: usize, min_sep: f64, rng: &mut ChaCha8Rng) -> Configuration {
    let domain = model.domain();
    let d = domain.dim;
    let (lo, hi) = if model.is_trapped() {
        let c = domain.lower() + 0.5 * domain.extent;
        (c - 2.0, c + 2.0)
    } else {
        (domain.lower() + min_sep, domain.upper() - min_sep)
    };
    loop {
        let coords: Vec<f64> = (0..n * d).map(|_| rng.gen_range(lo..hi)).collect();
        let c = Configuration::new(d, coords).unwrap();
        let ok = (0..n).all(|i| {
            (0..i).all(|j| {
                let r2: f64 = c
                    .particle(i)
                    .iter()
                    .zip(c.particle(j))
                    .map(|(a, b)| {
                        let mut dx = a - b;
                        if domain.is_periodic() {
                            dx -= domain.extent * (dx / domain.extent).round();
                        }
                        dx * dx
                    })
                    .sum();
                r2.sqrt() > min_sep
            })
        });
        if ok {
            return c;
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1.0)
}

/// Relative errors of the parameter gradient, coordinate gradient and
/// Laplacian of `ln φ` against central differences.
pub fn derivative_errors(ansatz: &Ansatz, params: &AnsatzParams, config: &Configuration) -> (f64, f64, f64) {
    let d = ansatz.differentiate(params, config, true).unwrap();
    let f = |p: &AnsatzParams, c: &Configuration| ansatz.log_amplitude(p, c).unwrap().finite().unwrap();

    let h = 1e-5;
    let mut fd_param = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let mut p = params.clone();
        p.as_mut_slice()[i] += h;
        let up = f(&p, config);
        p.as_mut_slice()[i] -= 2.0 * h;
        let down = f(&p, config);
        fd_param.push((up - down) / (2.0 * h));
    }
    let param = rel_err(d.param_grad.as_ref().unwrap(), &fd_param);

    let shifted = |k: usize, s: f64| {
        let mut c = config.clone();
        c.coords_mut()[k] += s;
        f(params, &c)
    };
    let h = 1e-5;
    let fd_grad: Vec<f64> = (0..config.coords().len())
        .map(|k| (shifted(k, h) - shifted(k, -h)) / (2.0 * h))
        .collect();
    let coord = rel_err(&d.coord_grad, &fd_grad);

    let h = 1e-3;
    // nine-point stencil, eighth order
    const C: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];
    let f0 = f(params, config);
    let fd_lap: f64 = (0..config.coords().len())
        .map(|k| {
            let side: f64 = (1..5).map(|j| C[j] * (shifted(k, j as f64 * h) + shifted(k, -(j as f64) * h))).sum();
            (C[0] * f0 + side) / (h * h)
        })
        .sum();
    let lap = (d.coord_laplacian - fd_lap).abs() / fd_lap.abs().max(1.0);
    (param, coord, lap)
}

/// Zeroes the last head layer, leaving only the analytic factors.
pub fn zero_head(ansatz: &Ansatz, params: &mut AnsatzParams) {
    for name in ["head2.w", "head2.b"] {
        let r = ansatz.layout().block(name).unwrap().range();
        params.as_mut_slice()[r].fill(0.0);
    }
}

/// Exact ring ground state in every sector: the Sutherland Jastrow with the
/// network head zeroed.
pub fn sutherland_state(g: f64) -> (ModelSpec, Ansatz, AnsatzParams) {
    let model = ModelSpec::cs1d(5.0, g, 40.0);
    let factors = FactorsConfig {
        jastrow: Some(Jastrow::Sutherland {
            lambda: model.cs1d_lambda(),
        }),
        ..FactorsConfig::default()
    }
    .resolve(&model)
    .unwrap();
    let ansatz = Ansatz::new(hyper(EmbeddingKind::Fourier, 4, 1, 8), factors, model.domain()).unwrap();
    let mut params = generic_params(&ansatz, 3);
    zero_head(&ansatz, &mut params);
    (model, ansatz, params)
}

/// `count` uniform configurations with `n` particles, spread over four chains.
pub fn fixed_n_batch(model: &ModelSpec, n: usize, count: usize, seed: u64) -> SampleBatch {
    let mut rng = rng(seed);
    let samples = (0..count)
        .map(|k| Sample {
            config: random_config(model, n, 1e-3, &mut rng),
            log_amp: 0.0,
            chain: k % 4,
        })
        .collect();
    SampleBatch {
        samples,
        chains: 4,
        samples_per_chain: count / 4,
        acceptance: Acceptance::default(),
        stuck: false,
    }
}
