//! No-U-turn sampler with warmup adaptation, and the driver that fits a
//! selection model on several independent chains.

mod adapt;
mod tree;

pub use adapt::{MassAdapter, StepSizeAdapter};
pub use tree::{leapfrog, transition, PhasePoint, TransitionStats, MAX_DELTA_H};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    pointwise_loglik, LogDensity, ModelDims, ModelFamily, Posterior, PriorSpec, SelParams, SelectionData,
};
use crate::two_step::heckman_two_step;

/// Starting point of each chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Init {
    /// Heckman two-step estimates mapped to the unconstrained scale.
    TwoStep,
    /// Uniform on `[−radius, radius]^d` in unconstrained space.
    Random { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub warmup: usize,
    pub draws: usize,
    pub thin: usize,
    pub chains: usize,
    pub max_treedepth: usize,
    pub target_accept: f64,
    pub seed: u64,
    pub init: Init,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            warmup: 1000,
            draws: 20000,
            thin: 5,
            chains: 1,
            max_treedepth: 10,
            target_accept: 0.85,
            seed: 0,
            init: Init::TwoStep,
        }
    }
}

impl SamplerConfig {
    /// Warmup of zero disables adaptation; otherwise at least 100
    /// iterations are needed for the window schedule.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Sampler(m));
        if self.warmup != 0 && self.warmup < 100 {
            return fail(format!("warmup {} is below 100", self.warmup));
        }
        if self.thin == 0 {
            return fail("thin must be at least 1".into());
        }
        if self.chains == 0 {
            return fail("need at least one chain".into());
        }
        if self.draws < self.thin {
            return fail(format!("draws {} leave no retained draw at thin {}", self.draws, self.thin));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return fail(format!("target_accept {} outside (0, 1)", self.target_accept));
        }
        if let Init::Random { radius } = self.init {
            if !(radius >= 0.0 && radius.is_finite()) {
                return fail(format!("init radius {radius} must be finite and nonnegative"));
            }
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        self.draws / self.thin
    }
}

/// Per-chain seed: splitmix64 of `seed + chain`.
pub fn chain_seed(seed: u64, chain: usize) -> u64 {
    let mut z = seed.wrapping_add(chain as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Progress snapshot passed to an optional callback.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Progress {
    pub chain: usize,
    /// Iteration index counting warmup.
    pub iteration: usize,
    pub divergences: usize,
}

pub type ProgressFn<'a> = &'a (dyn Fn(Progress) + Sync);

/// Retained draws of one chain on the unconstrained scale.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub positions: Vec<Vec<f64>>,
    pub stats: Vec<TransitionStats>,
    pub step_size: f64,
    pub inv_mass: Vec<f64>,
    pub warmup_divergences: usize,
}

/// Stan's step-size heuristic: double or halve `eps` until one leapfrog
/// step crosses an acceptance probability of 0.8.
fn find_reasonable_step_size<L, R>(target: &L, start: &PhasePoint, inv_mass: &[f64], rng: &mut R) -> f64
where
    L: LogDensity + ?Sized,
    R: Rng + ?Sized,
{
    let threshold = 0.8f64.ln();
    let trial = |eps: f64, rng: &mut R| {
        let mut z = start.clone();
        z.resample_momentum(inv_mass, rng);
        let h0 = z.hamiltonian(inv_mass);
        leapfrog(target, &mut z, eps, inv_mass);
        h0 - z.hamiltonian(inv_mass)
    };
    let mut eps = 1.0;
    let up = trial(eps, rng) > threshold;
    for _ in 0..100 {
        let delta = trial(eps, rng);
        if (up && !(delta > threshold)) || (!up && !(delta < threshold)) {
            break;
        }
        eps = if up { eps * 2.0 } else { eps * 0.5 };
    }
    eps
}

/// Runs one chain: warmup with step-size and metric adaptation, then
/// `draws` iterations keeping every `thin`-th.
pub fn sample_chain<L: LogDensity + ?Sized>(
    target: &L,
    init: &[f64],
    config: &SamplerConfig,
    chain: usize,
    progress: Option<ProgressFn<'_>>,
) -> Result<ChainOutput> {
    config.validate()?;
    let d = target.dim();
    if init.len() != d {
        return Err(Error::Dimension(format!("initial point has length {}, expected {d}", init.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(chain_seed(config.seed, chain));
    let mut z = PhasePoint::new(target, init.to_vec());
    if !z.log_density.is_finite() {
        return Err(Error::Sampler(format!("chain {chain}: log-density is not finite at the initial point")));
    }
    let mut inv_mass = vec![1.0; d];
    let mut eps = find_reasonable_step_size(target, &z, &inv_mass, &mut rng);
    let mut step_adapter = StepSizeAdapter::new(config.target_accept, eps);
    let mut mass_adapter = MassAdapter::new(d, config.warmup);

    let mut divergences = 0;
    for it in 0..config.warmup {
        let stats = transition(target, &mut z, eps, &inv_mass, config.max_treedepth, &mut rng);
        divergences += usize::from(stats.divergent);
        eps = step_adapter.update(stats.accept_stat);
        if mass_adapter.observe(&z.q, &mut inv_mass) {
            eps = find_reasonable_step_size(target, &z, &inv_mass, &mut rng);
            step_adapter.restart(eps);
        }
        if let Some(cb) = progress {
            cb(Progress { chain, iteration: it, divergences });
        }
    }
    if config.warmup > 0 {
        if divergences == config.warmup {
            return Err(Error::Sampler(format!("chain {chain}: every warmup transition diverged")));
        }
        eps = step_adapter.final_step_size();
    }
    let warmup_divergences = divergences;
    log::debug!("chain {chain}: adapted step size {eps:.4e}, {warmup_divergences} warmup divergences");

    let mut positions = Vec::with_capacity(config.retained());
    let mut all_stats = Vec::with_capacity(config.retained());
    for it in 0..config.draws {
        let stats = transition(target, &mut z, eps, &inv_mass, config.max_treedepth, &mut rng);
        divergences += usize::from(stats.divergent);
        if (it + 1) % config.thin == 0 {
            positions.push(z.q.clone());
            all_stats.push(stats);
        }
        if let Some(cb) = progress {
            cb(Progress { chain, iteration: config.warmup + it, divergences });
        }
    }
    Ok(ChainOutput { positions, stats: all_stats, step_size: eps, inv_mass, warmup_divergences })
}

/// Runs `config.chains` chains in parallel; chain `k` starts at `inits[k]`.
pub fn sample_chains<L: LogDensity + ?Sized>(
    target: &L,
    inits: &[Vec<f64>],
    config: &SamplerConfig,
    progress: Option<ProgressFn<'_>>,
) -> Result<Vec<ChainOutput>> {
    if inits.len() != config.chains {
        return Err(Error::Dimension(format!("{} initial points for {} chains", inits.len(), config.chains)));
    }
    inits
        .par_iter()
        .enumerate()
        .map(|(k, init)| sample_chain(target, init, config, k, progress))
        .collect()
}

/// Constrained draws of one chain with their pointwise log-likelihoods.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainDraws {
    /// Rows are [`SelParams::flatten`] vectors.
    pub params: Vec<Vec<f64>>,
    /// Rows are per-unit log-likelihood contributions.
    pub pointwise: Vec<Vec<f64>>,
    pub divergent: Vec<bool>,
    pub tree_depth: Vec<usize>,
    pub accept_stat: Vec<f64>,
    pub step_size: f64,
    pub warmup_divergences: usize,
}

/// Posterior sample of one model, all chains kept separate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub family: ModelFamily,
    pub dims: ModelDims,
    pub names: Vec<String>,
    pub chains: Vec<ChainDraws>,
}

impl PosteriorDraws {
    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    /// Retained draws per chain.
    pub fn n_draws(&self) -> usize {
        self.chains.first().map_or(0, |c| c.params.len())
    }

    pub fn n_units(&self) -> usize {
        self.chains.first().and_then(|c| c.pointwise.first()).map_or(0, Vec::len)
    }

    /// Draws of parameter `j`, one vector per chain.
    pub fn param_chains(&self, j: usize) -> Vec<Vec<f64>> {
        self.chains.iter().map(|c| c.params.iter().map(|row| row[j]).collect()).collect()
    }

    /// Draws of parameter `j` with chains concatenated.
    pub fn param_merged(&self, j: usize) -> Vec<f64> {
        self.chains.iter().flat_map(|c| c.params.iter().map(move |row| row[j])).collect()
    }

    /// Pointwise log-likelihood rows of all chains, concatenated.
    pub fn pointwise_merged(&self) -> Vec<&[f64]> {
        self.chains.iter().flat_map(|c| c.pointwise.iter().map(Vec::as_slice)).collect()
    }

    pub fn params_iter(&self) -> impl Iterator<Item = Result<SelParams>> + '_ {
        self.chains
            .iter()
            .flat_map(|c| c.params.iter())
            .map(|row| SelParams::unflatten(row, self.family, self.dims))
    }

    pub fn divergences(&self) -> usize {
        self.chains.iter().map(|c| c.divergent.iter().filter(|&&d| d).count()).sum()
    }

    pub fn mean_accept_stat(&self) -> f64 {
        let (sum, n) = self
            .chains
            .iter()
            .flat_map(|c| c.accept_stat.iter())
            .fold((0.0, 0usize), |(s, n), a| (s + a, n + 1));
        sum / n as f64
    }
}

fn initial_point(posterior: &Posterior<'_>, config: &SamplerConfig, chain: usize) -> Vec<f64> {
    let d = posterior.dim();
    let random = |radius: f64| {
        // separate stream from the chain's own sampler
        let mut rng = ChaCha8Rng::seed_from_u64(chain_seed(config.seed ^ 0xA5A5_A5A5, chain));
        (0..d).map(|_| rng.random_range(-radius..=radius)).collect::<Vec<f64>>()
    };
    match config.init {
        Init::Random { radius } => random(radius),
        Init::TwoStep => match heckman_two_step(posterior.data()) {
            Ok(est) => {
                let u = est.to_params(posterior.family()).to_unconstrained().0;
                if posterior.log_density(&u).is_finite() {
                    u
                } else {
                    log::warn!("two-step start has non-finite density; using random initialization");
                    random(2.0)
                }
            }
            Err(e) => {
                log::warn!("two-step initialization failed ({e}); using random initialization");
                random(2.0)
            }
        },
    }
}

/// Fits `family` to `data` and returns constrained draws with pointwise
/// log-likelihoods.
pub fn run_chains(
    data: &SelectionData,
    prior: &PriorSpec,
    family: ModelFamily,
    config: &SamplerConfig,
    progress: Option<ProgressFn<'_>>,
) -> Result<PosteriorDraws> {
    config.validate()?;
    let posterior = Posterior::new(data, *prior, family)?;
    let dims = posterior.dims();
    let inits: Vec<Vec<f64>> = (0..config.chains).map(|k| initial_point(&posterior, config, k)).collect();
    let outputs = sample_chains(&posterior, &inits, config, progress)?;
    let chains = outputs
        .into_iter()
        .map(|out| {
            let mut params = Vec::with_capacity(out.positions.len());
            let mut pointwise = Vec::with_capacity(out.positions.len());
            for u in &out.positions {
                let theta = SelParams::from_unconstrained(u, family, dims)?;
                theta.validate()?;
                pointwise.push(pointwise_loglik(&theta, data)?);
                params.push(theta.flatten());
            }
            Ok(ChainDraws {
                params,
                pointwise,
                divergent: out.stats.iter().map(|s| s.divergent).collect(),
                tree_depth: out.stats.iter().map(|s| s.tree_depth).collect(),
                accept_stat: out.stats.iter().map(|s| s.accept_stat).collect(),
                step_size: out.step_size,
                warmup_divergences: out.warmup_divergences,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorDraws { family, dims, names: SelParams::names(family, dims), chains })
}
