//! Run orchestration: configs, checkpoints, the optimize and evaluate
//! drivers, and their output files.

mod checkpoint;
pub mod cli;
mod config;

pub use checkpoint::{Checkpoint, CheckpointHeader, FORMAT_VERSION, MAGIC};
pub use config::{EvaluationSettings, FactorsConfig, RunConfig};

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;

use crate::ansatz::{Ansatz, AnsatzParams};
use crate::error::Result;
use crate::models::ModelSpec;
use crate::observables::{
    chi2_per_dof, density_profile, number_distribution, obdm_translation_invariant,
    projected_obdm, radial_density, rescaled_variance, DensityProfile, HoBasis, ObdmCurve, ProjectedObdm,
};
use crate::optimizer::{evaluate_batch, summarize, IterationRecord, Optimizer};
use crate::reference::{catalog, ExactBenchmark};
use crate::sampler::{AnsatzAmplitude, SampleBatch, Sampler, SamplerSettings};

/// Random-stream phase of the evaluation batch.
pub const EVAL_PHASE: u64 = 1 << 62;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.ckpt";

/// Benchmark whose model matches `model` up to rounding of the inputs.
pub fn matching_benchmark(model: &ModelSpec) -> Option<ExactBenchmark> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1.0);
    catalog().into_iter().find(|b| {
        let m = &b.model;
        m.kind == model.kind
            && close(m.extent, model.extent)
            && close(m.mu, model.mu)
            && close(m.g, model.g)
            && close(m.omega(), model.omega())
            && close(m.big_g(), model.big_g())
            && close(m.kinetic_prefactor, model.kinetic_prefactor)
    })
}

fn header_for(opt: &Optimizer, seed: u64) -> CheckpointHeader {
    CheckpointHeader {
        model: opt.model.clone(),
        hyper: opt.ansatz.hyper().clone(),
        factors: *opt.ansatz.factors(),
        seed,
        iteration: opt.iteration,
        n_params: opt.params.len(),
        chains: opt.sampler.configurations(),
        adam: (!opt.adam.m.is_empty()).then(|| opt.adam.clone()),
    }
}

fn save_checkpoint(opt: &Optimizer, seed: u64, path: &Path) -> Result<()> {
    Checkpoint {
        header: header_for(opt, seed),
        params: opt.params.clone(),
    }
    .save(path)
}

/// Result of [`optimize`].
#[derive(Debug)]
pub struct OptimizeOutcome {
    pub records: Vec<IterationRecord>,
    pub params: AnsatzParams,
    pub checkpoint: PathBuf,
    pub trajectory: PathBuf,
}

/// Builds the optimizer for `cfg`, fresh or from a checkpoint.
pub fn build_optimizer(cfg: &RunConfig, resume: Option<&Checkpoint>) -> Result<Optimizer> {
    let ansatz = cfg.build_ansatz()?;
    match resume {
        None => {
            let params = ansatz.init_params(cfg.init_seed());
            Optimizer::new(
                cfg.model.clone(),
                ansatz,
                params,
                cfg.optimizer.clone(),
                cfg.sampler.clone(),
                cfg.seed,
            )
        }
        Some(ck) => {
            ck.check_layout(&ansatz)?;
            let amp = AnsatzAmplitude {
                ansatz: &ansatz,
                params: &ck.params,
            };
            let sampler = if ck.header.chains.len() == cfg.sampler.chains {
                Sampler::from_configurations(cfg.sampler.clone(), cfg.seed, ck.header.chains.clone(), &amp)?
            } else {
                warn!(
                    "checkpoint holds {} chains, config asks for {}; starting fresh chains",
                    ck.header.chains.len(),
                    cfg.sampler.chains
                );
                Sampler::new(cfg.sampler.clone(), cfg.seed, &amp)?
            };
            Optimizer::from_parts(
                cfg.model.clone(),
                ansatz,
                ck.params.clone(),
                cfg.optimizer.clone(),
                sampler,
                ck.header.iteration,
                ck.header.adam.clone().unwrap_or_default(),
            )
        }
    }
}

/// Runs the training loop of `cfg` into `cfg.out_dir`, appending one
/// trajectory row per iteration and checkpointing every
/// `cfg.checkpoint_every` iterations. With zero iterations the initial state
/// is evaluated once and recorded as iteration 0.
pub fn optimize(cfg: &RunConfig, resume: Option<&Path>) -> Result<OptimizeOutcome> {
    let ck = resume.map(Checkpoint::load).transpose()?;
    let mut opt = build_optimizer(cfg, ck.as_ref())?;
    fs::create_dir_all(&cfg.out_dir)?;
    let trajectory = cfg.out_dir.join(TRAJECTORY_FILE);
    let ckpt_path = cfg.out_dir.join(CHECKPOINT_FILE);
    let mut file = if ck.is_some() && trajectory.exists() {
        fs::OpenOptions::new().append(true).open(&trajectory)?
    } else {
        let mut f = fs::File::create(&trajectory)?;
        writeln!(f, "{}", IterationRecord::CSV_HEADER)?;
        f
    };
    let total = cfg.optimizer.iterations;
    let mut records = Vec::new();
    if total == 0 && opt.iteration == 0 {
        let (_, _, s) = opt.evaluate(0)?;
        let rec = IterationRecord {
            iter: 0,
            energy: s.energy.mean,
            energy_stderr: s.energy.stderr,
            mean_n: s.n.mean,
            stderr_n: s.n.stderr,
            rescaled_variance: s.rescaled_variance,
            accept_disp: s.acceptance.displace.rate(),
            accept_add: s.acceptance.insert.rate(),
            accept_rm: s.acceptance.remove.rate(),
            learning_rate: 0.0,
            step_norm: 0.0,
        };
        writeln!(file, "{}", rec.csv_row())?;
        records.push(rec);
    }
    let every = cfg.checkpoint_every;
    let seed = cfg.seed;
    let result = opt.run(total, |o, rec| {
        writeln!(file, "{}", rec.csv_row())?;
        if rec.iter % 10 == 0 {
            info!(
                "iter {:5}  E = {:.5} ± {:.2e}  <n> = {:.3}",
                rec.iter, rec.energy, rec.energy_stderr, rec.mean_n
            );
        }
        if every > 0 && o.iteration % every == 0 {
            save_checkpoint(o, seed, &ckpt_path)?;
        }
        Ok(())
    });
    file.flush()?;
    match result {
        Ok(r) => records.extend(r),
        Err(e) => {
            // parameters were rolled back to the last completed iteration
            save_checkpoint(&opt, seed, &ckpt_path)?;
            return Err(e);
        }
    }
    save_checkpoint(&opt, seed, &ckpt_path)?;
    Ok(OptimizeOutcome {
        records,
        params: opt.params,
        checkpoint: ckpt_path,
        trajectory,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ExactComparison {
    pub name: String,
    pub energy: f64,
    pub n0: Vec<usize>,
    pub absolute_error: f64,
    /// Absent when the exact energy is zero.
    pub relative_error: Option<f64>,
}

/// Observables of one evaluation batch.
#[derive(Clone, Debug, Serialize)]
pub struct EvaluationReport {
    pub model: ModelSpec,
    pub iteration: usize,
    pub samples: usize,
    pub chains: usize,
    pub energy: f64,
    pub energy_stderr: f64,
    pub mean_n: f64,
    pub stderr_n: f64,
    pub rescaled_variance: f64,
    pub rescaled_variance_unreliable: bool,
    pub accept_disp: f64,
    pub accept_add: f64,
    pub accept_rm: f64,
    pub n_distribution: Vec<f64>,
    pub exact: Option<ExactComparison>,
    pub density_chi2_per_dof: Option<f64>,
    pub condensate_fraction: Option<f64>,
    pub condensate_fraction_stderr: Option<f64>,
    pub obdm_trace: Option<f64>,
    pub obdm_trace_stderr: Option<f64>,
    pub obdm_trace_deficit: Option<bool>,
}

/// Full evaluation output.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub report: EvaluationReport,
    pub batch: SampleBatch,
    pub local_energies: Vec<f64>,
    pub density: DensityProfile,
    /// Oracle density at the bin centres, when one is known.
    pub density_oracle: Option<Vec<f64>>,
    pub obdm: Option<ObdmCurve>,
    pub projected: Option<ProjectedObdm>,
}

/// Samples `params` and computes every observable that applies to the model.
pub fn evaluate_state(
    model: &ModelSpec,
    ansatz: &Ansatz,
    params: &AnsatzParams,
    sampler: &mut Sampler,
    settings: &EvaluationSettings,
    iteration: usize,
) -> Result<Evaluation> {
    let amp = AnsatzAmplitude { ansatz, params };
    let batch = sampler.run(&amp, EVAL_PHASE);
    let eval = evaluate_batch(model, ansatz, params, &batch, false)?;
    let summary = summarize(&batch, &eval.local_energies)?;
    let rv = rescaled_variance(&eval.local_energies, summary.n.mean, &summary.energy)?;
    let domain = model.domain();
    let bench = matching_benchmark(model);

    let (density, density_oracle) = if model.is_trapped() && domain.dim == 2 {
        let r_max = settings.radial_max.unwrap_or(0.5 * domain.extent);
        let d = radial_density(&batch, r_max, settings.density_bins)?;
        let oracle = bench
            .as_ref()
            .and_then(|b| d.centers[0].iter().map(|&r| b.density.eval(r)).collect::<Option<Vec<_>>>());
        (d, oracle)
    } else {
        let d = density_profile(&batch, &domain, settings.density_bins)?;
        let oracle = if domain.dim == 1 {
            bench
                .as_ref()
                .and_then(|b| d.centers[0].iter().map(|&x| b.density.eval(x)).collect::<Option<Vec<_>>>())
        } else {
            None
        };
        (d, oracle)
    };
    let chi2 = density_oracle
        .as_ref()
        .map(|o| chi2_per_dof(&density.value, &density.stderr, o));

    let obdm = if domain.is_periodic() {
        Some(obdm_translation_invariant(&batch, &amp, settings.obdm_points)?)
    } else {
        None
    };
    let projected = if model.is_trapped() && domain.dim == 2 {
        let gamma = settings.obdm_reference_width.unwrap_or_else(|| {
            let (sum, count) = batch
                .samples
                .iter()
                .flat_map(|s| s.config.coords().to_vec())
                .fold((0.0, 0usize), |(a, c), x| (a + x * x, c + 1));
            let r2 = if count > 0 { 2.0 * sum / count as f64 } else { 0.0 };
            if r2 > 0.0 {
                (1.0 / (1.5 * r2)).sqrt().min(model.omega().sqrt())
            } else {
                model.omega().sqrt()
            }
        });
        let basis = HoBasis::shells(model.omega().sqrt(), settings.obdm_shells).with_reference(gamma);
        Some(projected_obdm(&batch, &amp, &basis, sampler.seed ^ EVAL_PHASE)?)
    } else {
        None
    };
    let cf = match &projected {
        Some(p) if p.mean_n > 0.0 => Some(p.condensate_fraction(1e-9)?),
        _ => None,
    };

    let report = EvaluationReport {
        model: model.clone(),
        iteration,
        samples: batch.len(),
        chains: batch.chains,
        energy: summary.energy.mean,
        energy_stderr: summary.energy.stderr,
        mean_n: summary.n.mean,
        stderr_n: summary.n.stderr,
        rescaled_variance: rv.value,
        rescaled_variance_unreliable: rv.unreliable,
        accept_disp: batch.acceptance.displace.rate(),
        accept_add: batch.acceptance.insert.rate(),
        accept_rm: batch.acceptance.remove.rate(),
        n_distribution: number_distribution(&batch.particle_numbers(), ansatz.hyper().n_max),
        exact: bench.map(|b| ExactComparison {
            absolute_error: (summary.energy.mean - b.energy).abs(),
            relative_error: (b.energy != 0.0).then(|| (summary.energy.mean - b.energy).abs() / b.energy.abs()),
            name: b.name.to_string(),
            energy: b.energy,
            n0: b.n0,
        }),
        density_chi2_per_dof: chi2,
        condensate_fraction: cf.as_ref().map(|c| c.mean),
        condensate_fraction_stderr: cf.as_ref().map(|c| c.stderr),
        obdm_trace: projected.as_ref().map(|p| p.trace),
        obdm_trace_stderr: projected.as_ref().map(|p| p.trace_stderr),
        obdm_trace_deficit: projected.as_ref().map(|p| p.trace_deficit),
    };
    Ok(Evaluation {
        report,
        batch,
        local_energies: eval.local_energies,
        density,
        density_oracle,
        obdm,
        projected,
    })
}

/// Writes `density.csv`, `obdm.csv` (and `obdm_projected.csv`) and
/// `summary.json` into `dir`.
pub fn write_evaluation(ev: &Evaluation, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut s = String::new();
    let axes = ev.density.centers.len();
    let radial = ev.report.model.is_trapped() && ev.report.model.dim() == 2;
    let names: Vec<String> = if radial {
        vec!["r".into()]
    } else {
        (0..axes).map(|a| ["x", "y", "z"][a].to_string()).collect()
    };
    let _ = writeln!(s, "{},density,stderr,exact", names.join(","));
    let bins = ev.density.centers[0].len();
    for (idx, (v, e)) in ev.density.value.iter().zip(&ev.density.stderr).enumerate() {
        let mut rest = idx;
        let mut coords = vec![0.0; axes];
        for a in (0..axes).rev() {
            coords[a] = ev.density.centers[a][rest % bins];
            rest /= bins;
        }
        let c: Vec<String> = coords.iter().map(|x| format!("{x:.6}")).collect();
        let exact = ev
            .density_oracle
            .as_ref()
            .map_or(String::new(), |o| format!("{:.8e}", o[idx]));
        let _ = writeln!(s, "{},{v:.8e},{e:.8e},{exact}", c.join(","));
    }
    fs::write(dir.join("density.csv"), s)?;

    if let Some(o) = &ev.obdm {
        let mut s = String::from("s,obdm,stderr\n");
        for ((x, v), e) in o.s.iter().zip(&o.value).zip(&o.stderr) {
            let _ = writeln!(s, "{x:.6},{v:.8e},{e:.8e}");
        }
        fs::write(dir.join("obdm.csv"), s)?;
    }
    if let Some(p) = &ev.projected {
        let mut s = String::from("i,j,nx_i,ny_i,nx_j,ny_j,value,stderr\n");
        let m = p.basis.len();
        for i in 0..m {
            for j in 0..m {
                let (a, b) = p.basis.quanta[i];
                let (c, d) = p.basis.quanta[j];
                let _ = writeln!(
                    s,
                    "{i},{j},{a},{b},{c},{d},{:.8e},{:.8e}",
                    p.matrix.get(i, j),
                    p.stderr.get(i, j)
                );
            }
        }
        fs::write(dir.join("obdm.csv"), s)?;
    }
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&ev.report)?)?;
    Ok(())
}

/// Loads a checkpoint and samples it. Without a config, the model and ansatz
/// come from the checkpoint and sampler settings are defaults.
pub fn evaluate_checkpoint(cfg: Option<&RunConfig>, checkpoint: &Path, seed_override: Option<u64>) -> Result<Evaluation> {
    let ck = Checkpoint::load(checkpoint)?;
    let (model, ansatz, mut settings, eval_settings, seed) = match cfg {
        Some(c) => (
            c.model.clone(),
            c.build_ansatz()?,
            c.sampler.clone(),
            c.evaluation.clone(),
            c.seed,
        ),
        None => (
            ck.header.model.clone(),
            Ansatz::new(ck.header.hyper.clone(), ck.header.factors, ck.header.model.domain())?,
            SamplerSettings::default(),
            EvaluationSettings::default(),
            ck.header.seed,
        ),
    };
    ck.check_layout(&ansatz)?;
    if let Some(n) = eval_settings.samples_per_chain {
        settings.samples_per_chain = n;
    }
    let seed = seed_override.unwrap_or(seed);
    let amp = AnsatzAmplitude {
        ansatz: &ansatz,
        params: &ck.params,
    };
    let mut sampler = if ck.header.chains.len() == settings.chains {
        Sampler::from_configurations(settings, seed, ck.header.chains.clone(), &amp)?
    } else {
        Sampler::new(settings, seed, &amp)?
    };
    evaluate_state(&model, &ansatz, &ck.params, &mut sampler, &eval_settings, ck.header.iteration)
}

/// [`evaluate_checkpoint`] followed by [`write_evaluation`] into `out`.
pub fn evaluate(
    cfg: Option<&RunConfig>,
    checkpoint: &Path,
    out: &Path,
    seed_override: Option<u64>,
) -> Result<EvaluationReport> {
    let ev = evaluate_checkpoint(cfg, checkpoint, seed_override)?;
    write_evaluation(&ev, out)?;
    Ok(ev.report)
}
