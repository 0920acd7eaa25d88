//! Grand-canonical Metropolis-Hastings over Fock space.
//!
//! Each step proposes one of three moves: with probability `p±` insert a
//! uniformly placed particle, with probability `p±` remove a uniformly chosen
//! particle, otherwise displace. Acceptance ratios, in log space:
//!
//! * displace: `2 Δ ln φ`
//! * insert:   `d ln L + 2 (ln φ_{n+1} - ln φ_n)`
//! * remove:  `-d ln L + 2 (ln φ_{n-1} - ln φ_n)`

pub mod validation;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{Ansatz, AnsatzParams, LogAmp};
use crate::error::{Error, Result};
use crate::geometry::{Configuration, Domain};

/// Anything the sampler can draw configurations from.
pub trait Amplitude: Sync {
    fn domain(&self) -> &Domain;
    fn n_max(&self) -> usize;
    fn log_amp(&self, config: &Configuration) -> LogAmp;
    /// Particle number chains start from.
    fn initial_n(&self) -> usize {
        self.n_max() / 2
    }
}

/// The neural ansatz at fixed parameters.
pub struct AnsatzAmplitude<'a> {
    pub ansatz: &'a Ansatz,
    pub params: &'a AnsatzParams,
}

impl Amplitude for AnsatzAmplitude<'_> {
    fn domain(&self) -> &Domain {
        self.ansatz.domain()
    }

    fn n_max(&self) -> usize {
        self.ansatz.hyper().n_max
    }

    fn log_amp(&self, config: &Configuration) -> LogAmp {
        self.ansatz
            .log_amplitude(self.params, config)
            .unwrap_or(LogAmp::Zero)
    }

    /// Centre of the particle-number window, or half capacity without one.
    fn initial_n(&self) -> usize {
        match self.ansatz.window(self.params) {
            Some(w) => {
                let c = (0.5 * (w.c1 + w.c2)).round().max(0.0) as usize;
                c.min(self.n_max())
            }
            None => self.n_max() / 2,
        }
    }
}

/// Closure-backed amplitude, mostly for analytic trial states.
pub struct FnAmplitude<F> {
    pub domain: Domain,
    pub n_max: usize,
    pub initial_n: usize,
    pub f: F,
}

impl<F: Fn(&Configuration) -> LogAmp + Sync> Amplitude for FnAmplitude<F> {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn n_max(&self) -> usize {
        self.n_max
    }

    fn log_amp(&self, config: &Configuration) -> LogAmp {
        (self.f)(config)
    }

    fn initial_n(&self) -> usize {
        self.initial_n
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Displacement {
    /// One shared shift applied to every particle.
    #[default]
    Rigid,
    /// Shift of a single randomly chosen particle.
    Single,
}

fn default_p_pm() -> f64 {
    0.25
}
fn default_chains() -> usize {
    100
}
fn default_sweep() -> usize {
    30
}
fn default_samples() -> usize {
    50
}
fn default_burn_in() -> usize {
    5
}
fn default_warmup() -> usize {
    50
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSettings {
    /// Probability of each of the insert and remove moves.
    #[serde(default = "default_p_pm")]
    pub p_pm: f64,
    /// Displacement width `w`; `0.1 L` when absent.
    #[serde(default)]
    pub width: Option<f64>,
    #[serde(default = "default_chains")]
    pub chains: usize,
    /// Steps between retained samples.
    #[serde(default = "default_sweep")]
    pub sweep: usize,
    #[serde(default = "default_samples")]
    pub samples_per_chain: usize,
    /// Sweeps discarded at the start of every batch.
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// Extra sweeps discarded when chains are created.
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    #[serde(default)]
    pub displacement: Displacement,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            p_pm: default_p_pm(),
            width: None,
            chains: default_chains(),
            sweep: default_sweep(),
            samples_per_chain: default_samples(),
            burn_in: default_burn_in(),
            warmup: default_warmup(),
            displacement: Displacement::Rigid,
        }
    }
}

impl SamplerSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSettings(m));
        if !(0.0..0.5).contains(&self.p_pm) {
            return bad(format!("p_pm must satisfy 0 ≤ 2 p_pm < 1, got {}", self.p_pm));
        }
        if let Some(w) = self.width {
            if !(w > 0.0) {
                return bad(format!("width must be positive, got {w}"));
            }
        }
        if self.chains == 0 || self.samples_per_chain == 0 || self.sweep == 0 {
            return bad("chains, sweep and samples_per_chain must be positive".into());
        }
        Ok(())
    }

    pub fn width_for(&self, domain: &Domain) -> f64 {
        self.width.unwrap_or(0.1 * domain.extent)
    }

    pub fn n_samples(&self) -> usize {
        self.chains * self.samples_per_chain
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveTally {
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveTally {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }

    fn merge(&mut self, other: &MoveTally) {
        self.proposed += other.proposed;
        self.accepted += other.accepted;
    }
}

/// Per-move-kind acceptance tallies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Acceptance {
    pub displace: MoveTally,
    pub insert: MoveTally,
    pub remove: MoveTally,
}

impl Acceptance {
    pub fn merge(&mut self, other: &Acceptance) {
        self.displace.merge(&other.displace);
        self.insert.merge(&other.insert);
        self.remove.merge(&other.remove);
    }

    pub fn overall(&self) -> f64 {
        let p = self.displace.proposed + self.insert.proposed + self.remove.proposed;
        let a = self.displace.accepted + self.insert.accepted + self.remove.accepted;
        if p == 0 {
            0.0
        } else {
            a as f64 / p as f64
        }
    }
}

/// One Markov chain.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub config: Configuration,
    pub log_amp: f64,
    pub accept: Acceptance,
}

/// Which move a step attempted and whether it was taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Displace(bool),
    Insert(bool),
    Remove(bool),
    /// Displacement of an empty configuration: nothing to move.
    Idle,
}

fn accept<R: Rng>(rng: &mut R, log_ratio: f64) -> bool {
    // NaN never accepts
    log_ratio >= 0.0 || rng.gen::<f64>().ln() < log_ratio
}

/// One Metropolis-Hastings step.
pub fn step<A: Amplitude + ?Sized, R: Rng>(
    chain: &mut ChainState,
    amp: &A,
    p_pm: f64,
    width: f64,
    displacement: Displacement,
    rng: &mut R,
) -> StepOutcome {
    let domain = *amp.domain();
    let d = domain.dim;
    let n = chain.config.n();
    let u: f64 = rng.gen();
    if u < p_pm {
        if n >= amp.n_max() {
            chain.accept.insert.record(false);
            return StepOutcome::Insert(false);
        }
        let r = domain.sample_position(rng);
        let mut prop = chain.config.clone();
        prop.push(&r);
        let ok = try_move(chain, amp, prop, d as f64 * domain.extent.ln(), rng);
        chain.accept.insert.record(ok);
        StepOutcome::Insert(ok)
    } else if u < 2.0 * p_pm {
        if n == 0 {
            chain.accept.remove.record(false);
            return StepOutcome::Remove(false);
        }
        let i = rng.gen_range(0..n);
        let mut prop = chain.config.clone();
        prop.swap_remove(i);
        let ok = try_move(chain, amp, prop, -(d as f64) * domain.extent.ln(), rng);
        chain.accept.remove.record(ok);
        StepOutcome::Remove(ok)
    } else {
        if n == 0 {
            return StepOutcome::Idle;
        }
        let mut prop = chain.config.clone();
        match displacement {
            Displacement::Rigid => {
                let zeta: Vec<f64> = (0..d).map(|_| width * (rng.gen::<f64>() - 0.5)).collect();
                for (k, x) in prop.coords_mut().iter_mut().enumerate() {
                    *x = domain.wrap(*x + zeta[k % d]);
                }
            }
            Displacement::Single => {
                let i = rng.gen_range(0..n);
                for x in &mut prop.coords_mut()[i * d..(i + 1) * d] {
                    *x = domain.wrap(*x + width * (rng.gen::<f64>() - 0.5));
                }
            }
        }
        let ok = try_move(chain, amp, prop, 0.0, rng);
        chain.accept.displace.record(ok);
        StepOutcome::Displace(ok)
    }
}

fn try_move<A: Amplitude + ?Sized, R: Rng>(
    chain: &mut ChainState,
    amp: &A,
    prop: Configuration,
    log_prefactor: f64,
    rng: &mut R,
) -> bool {
    if !amp.domain().contains(&prop) {
        return false;
    }
    let LogAmp::Finite(new) = amp.log_amp(&prop) else {
        return false;
    };
    let ok = accept(rng, log_prefactor + 2.0 * (new - chain.log_amp));
    if ok {
        chain.config = prop;
        chain.log_amp = new;
    }
    ok
}

/// A retained configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub config: Configuration,
    pub log_amp: f64,
    pub chain: usize,
}

/// Samples of one sampling phase, stored chain-major.
#[derive(Clone, Debug)]
pub struct SampleBatch {
    pub samples: Vec<Sample>,
    pub chains: usize,
    pub samples_per_chain: usize,
    pub acceptance: Acceptance,
    /// Burn-in acceptance fell below 1%.
    pub stuck: bool,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn particle_numbers(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.config.n()).collect()
    }

    /// Chain index of every sample.
    pub fn chain_ids(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.chain).collect()
    }
}

/// Counter-based generator for `(seed, phase)` on stream `chain`.
pub fn chain_rng(seed: u64, phase: u64, chain: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&phase.to_le_bytes());
    key[16..24].copy_from_slice(b"bosefock");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(chain as u64);
    rng
}

/// A set of persistent chains.
#[derive(Clone, Debug)]
pub struct Sampler {
    pub settings: SamplerSettings,
    pub seed: u64,
    chains: Vec<ChainState>,
}

/// Phase index reserved for chain creation.
const INIT_PHASE: u64 = u64::MAX;

impl Sampler {
    /// Creates chains at `amp.initial_n()` uniformly placed particles and runs
    /// the warm-up sweeps.
    pub fn new<A: Amplitude>(settings: SamplerSettings, seed: u64, amp: &A) -> Result<Self> {
        settings.validate()?;
        let domain = *amp.domain();
        let n0 = amp.initial_n().min(amp.n_max());
        let width = settings.width_for(&domain);
        let chains = (0..settings.chains)
            .into_par_iter()
            .map(|c| {
                let mut rng = chain_rng(seed, INIT_PHASE, c);
                let mut state = None;
                // redraw until the start has non-zero amplitude
                for _ in 0..1000 {
                    let cfg = domain.sample_configuration(n0, &mut rng);
                    if let LogAmp::Finite(v) = amp.log_amp(&cfg) {
                        state = Some(ChainState {
                            config: cfg,
                            log_amp: v,
                            accept: Acceptance::default(),
                        });
                        break;
                    }
                }
                let mut state = state.ok_or(Error::ZeroAmplitude)?;
                for _ in 0..settings.warmup * settings.sweep {
                    step(&mut state, amp, settings.p_pm, width, settings.displacement, &mut rng);
                }
                state.accept = Acceptance::default();
                Ok(state)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            settings,
            seed,
            chains,
        })
    }

    /// Restores chains at saved configurations without warm-up.
    pub fn from_configurations<A: Amplitude>(
        settings: SamplerSettings,
        seed: u64,
        configs: Vec<Configuration>,
        amp: &A,
    ) -> Result<Self> {
        settings.validate()?;
        if configs.len() != settings.chains {
            return Err(Error::InvalidSettings(format!(
                "{} saved chains for {} configured",
                configs.len(),
                settings.chains
            )));
        }
        let chains = configs
            .into_iter()
            .map(|config| {
                let log_amp = amp.log_amp(&config).finite().ok_or(Error::ZeroAmplitude)?;
                Ok(ChainState {
                    config,
                    log_amp,
                    accept: Acceptance::default(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            settings,
            seed,
            chains,
        })
    }

    pub fn configurations(&self) -> Vec<Configuration> {
        self.chains.iter().map(|c| c.config.clone()).collect()
    }

    pub fn chains(&self) -> &[ChainState] {
        &self.chains
    }

    /// Re-evaluates cached amplitudes, needed after a parameter update.
    pub fn refresh<A: Amplitude>(&mut self, amp: &A) {
        self.chains.par_iter_mut().for_each(|c| {
            c.log_amp = amp.log_amp(&c.config).ln();
        });
    }

    /// Burn-in then `samples_per_chain` retained samples per chain, `sweep`
    /// steps apart. `phase` keys the random streams.
    pub fn run<A: Amplitude>(&mut self, amp: &A, phase: u64) -> SampleBatch {
        self.refresh(amp);
        let s = self.settings.clone();
        let width = s.width_for(amp.domain());
        let seed = self.seed;
        let results: Vec<(Vec<Sample>, Acceptance, Acceptance)> = self
            .chains
            .par_iter_mut()
            .enumerate()
            .map(|(c, chain)| {
                let mut rng = chain_rng(seed, phase, c);
                chain.accept = Acceptance::default();
                for _ in 0..s.burn_in * s.sweep {
                    step(chain, amp, s.p_pm, width, s.displacement, &mut rng);
                }
                let burn = chain.accept;
                chain.accept = Acceptance::default();
                let mut out = Vec::with_capacity(s.samples_per_chain);
                for _ in 0..s.samples_per_chain {
                    for _ in 0..s.sweep {
                        step(chain, amp, s.p_pm, width, s.displacement, &mut rng);
                    }
                    out.push(Sample {
                        config: chain.config.clone(),
                        log_amp: chain.log_amp,
                        chain: c,
                    });
                }
                (out, burn, chain.accept)
            })
            .collect();
        let mut samples = Vec::with_capacity(s.n_samples());
        let mut acceptance = Acceptance::default();
        let mut burn = Acceptance::default();
        for (smp, b, a) in results {
            samples.extend(smp);
            burn.merge(&b);
            acceptance.merge(&a);
        }
        let stuck = s.burn_in > 0 && burn.overall() < 0.01;
        if stuck {
            warn!(
                "sampler acceptance during burn-in is {:.3}%; chains may be stuck",
                100.0 * burn.overall()
            );
        }
        SampleBatch {
            samples,
            chains: s.chains,
            samples_per_chain: s.samples_per_chain,
            acceptance,
            stuck,
        }
    }
}
