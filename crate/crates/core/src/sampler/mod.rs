//! Multi-chain Hamiltonian Monte Carlo with a fixed number of leapfrog steps.
//!
//! Warmup adapts the step size by dual averaging and a diagonal inverse
//! metric from two variance windows (see [`adapt::WarmupSchedule`]). Each
//! chain owns a ChaCha8 stream derived from the root seed and its index, so
//! draws are bit-identical regardless of how chains are scheduled.

pub mod adapt;
pub mod leapfrog;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{GroupedDataset, XScaling};
use crate::error::{Error, Result};
use crate::model::{HyperConfig, ModelKind, Posterior};

use adapt::{DualAveraging, DualAveragingSettings, RunningVariance, WarmupSchedule};
pub use leapfrog::{leapfrog, PhasePoint};

/// Energy error above which a transition counts as divergent.
pub const MAX_ENERGY_ERROR: f64 = 1000.0;
/// Fraction of divergent post-warmup transitions that flags a chain.
pub const DIVERGENCE_FLAG_RATE: f64 = 0.2;
const INIT_ATTEMPTS: usize = 100;
/// Each transition uses `step * STEP_JITTER^u` with `u ~ U(-1, 1)`, which
/// lets a chain leave regions where the frozen step size is too large.
pub const STEP_JITTER: f64 = 2.0;

/// A differentiable log density on an unconstrained space.
pub trait Target: Sync {
    fn dim(&self) -> usize;

    /// Writes the gradient into `grad` and returns the log density.
    fn log_density_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64;

    /// Names of the constrained parameters, one per coordinate.
    fn param_names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("theta[{i}]")).collect()
    }

    /// Maps an unconstrained point to the reported (constrained) scale.
    fn constrain(&self, theta: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(theta);
    }

    fn meta(&self) -> SampleMeta {
        SampleMeta::default()
    }
}

/// What the draws were fitted to: model kind, tool labels and sizes, and the
/// x scaling needed to evaluate predictions on raw sliding distances.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub kind: Option<ModelKind>,
    pub labels: Vec<String>,
    pub group_sizes: Vec<usize>,
    pub scaling: XScaling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_chains: usize,
    pub n_warmup: usize,
    pub n_samples: usize,
    pub target_accept: f64,
    pub n_leapfrog: usize,
    pub rng_seed: u64,
    /// Initial unconstrained values are uniform on `[-init_jitter, init_jitter]`.
    pub init_jitter: f64,
    /// Upper bound on chains run concurrently; 1 runs them in sequence.
    #[serde(default = "one")]
    pub max_threads: usize,
}

fn one() -> usize {
    1
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_chains: 4,
            n_warmup: 1000,
            n_samples: 1000,
            target_accept: 0.8,
            n_leapfrog: 32,
            rng_seed: 1,
            init_jitter: 2.0,
            max_threads: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_chains < 1 {
            return bad("n_chains must be at least 1".into());
        }
        if self.n_warmup < 100 {
            return bad(format!("n_warmup must be at least 100, got {}", self.n_warmup));
        }
        if self.n_samples < 1 {
            return bad("n_samples must be at least 1".into());
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad(format!("target_accept must lie in (0, 1), got {}", self.target_accept));
        }
        if self.n_leapfrog < 1 {
            return bad("n_leapfrog must be at least 1".into());
        }
        if !(self.init_jitter > 0.0 && self.init_jitter.is_finite()) {
            return bad(format!("init_jitter must be positive, got {}", self.init_jitter));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    /// Mean Metropolis acceptance probability over post-warmup iterations.
    pub mean_accept: f64,
    pub n_divergent: usize,
    /// Step size frozen at the end of warmup.
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
}

impl ChainStats {
    pub fn divergence_rate(&self, n_samples: usize) -> f64 {
        self.n_divergent as f64 / n_samples.max(1) as f64
    }
}

/// Post-warmup draws on the constrained scale, indexed
/// `[chain][iteration][parameter]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub names: Vec<String>,
    pub draws: Vec<Vec<Vec<f64>>>,
    pub chains: Vec<ChainStats>,
    pub meta: SampleMeta,
}

impl PosteriorSamples {
    pub fn n_chains(&self) -> usize {
        self.draws.len()
    }

    pub fn n_iterations(&self) -> usize {
        self.draws.first().map_or(0, Vec::len)
    }

    pub fn n_total(&self) -> usize {
        self.draws.iter().map(Vec::len).sum()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// One parameter, split by chain.
    pub fn chain_column(&self, param: usize) -> Vec<Vec<f64>> {
        self.draws
            .iter()
            .map(|c| c.iter().map(|d| d[param]).collect())
            .collect()
    }

    /// One parameter, all chains concatenated.
    pub fn column(&self, param: usize) -> Vec<f64> {
        self.draws.iter().flatten().map(|d| d[param]).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<f64>> {
        self.param_index(name).map(|i| self.column(i))
    }

    pub fn mean_of(&self, name: &str) -> Option<f64> {
        self.column_by_name(name)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
    }

    pub fn total_divergent(&self) -> usize {
        self.chains.iter().map(|c| c.n_divergent).sum()
    }

    /// A chain diverged on more than [`DIVERGENCE_FLAG_RATE`] of its draws.
    pub fn divergence_flagged(&self) -> bool {
        let n = self.n_iterations();
        self.chains
            .iter()
            .any(|c| c.divergence_rate(n) > DIVERGENCE_FLAG_RATE)
    }
}

/// Fits `kind` to `data` with the default prior structure.
pub fn fit(
    kind: ModelKind,
    data: &GroupedDataset,
    hyper: &HyperConfig,
    cfg: &SamplerConfig,
) -> Result<PosteriorSamples> {
    if data.n_obs() == 0 {
        return Err(Error::Data("cannot fit an empty dataset".into()));
    }
    let posterior = Posterior::new(kind, data, hyper)?;
    sample(&posterior, cfg)
}

/// Runs `cfg.n_chains` independent chains on `target`.
pub fn sample<T: Target>(target: &T, cfg: &SamplerConfig) -> Result<PosteriorSamples> {
    cfg.validate()?;
    let threads = cfg.max_threads.max(1);
    let mut results: Vec<Result<(Vec<Vec<f64>>, ChainStats)>> = Vec::with_capacity(cfg.n_chains);
    if threads == 1 || cfg.n_chains == 1 {
        for chain in 0..cfg.n_chains {
            results.push(run_chain(target, cfg, chain));
        }
    } else {
        let ids: Vec<usize> = (0..cfg.n_chains).collect();
        for batch in ids.chunks(threads) {
            std::thread::scope(|s| {
                let handles: Vec<_> = batch
                    .iter()
                    .map(|&chain| s.spawn(move || run_chain(target, cfg, chain)))
                    .collect();
                for h in handles {
                    results.push(h.join().expect("chain thread panicked"));
                }
            });
        }
    }

    let mut draws = Vec::with_capacity(cfg.n_chains);
    let mut chains = Vec::with_capacity(cfg.n_chains);
    for r in results {
        let (d, s) = r?;
        draws.push(d);
        chains.push(s);
    }
    Ok(PosteriorSamples {
        names: target.param_names(),
        draws,
        chains,
        meta: target.meta(),
    })
}

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

fn initial_point<T: Target>(target: &T, cfg: &SamplerConfig, rng: &mut ChaCha8Rng) -> Result<PhasePoint> {
    let dim = target.dim();
    let f = |t: &[f64], g: &mut [f64]| target.log_density_grad(t, g);
    for _ in 0..INIT_ATTEMPTS {
        let theta: Vec<f64> = (0..dim)
            .map(|_| rng.random_range(-cfg.init_jitter..=cfg.init_jitter))
            .collect();
        let pt = PhasePoint::new(theta, vec![0.0; dim], &f);
        if pt.is_finite() {
            return Ok(pt);
        }
    }
    Err(Error::Init(format!(
        "log density not finite at {INIT_ATTEMPTS} random initial points"
    )))
}

fn draw_momentum(rng: &mut ChaCha8Rng, inv_metric: &[f64], out: &mut [f64]) {
    for (p, w) in out.iter_mut().zip(inv_metric) {
        let z: f64 = rng.sample(StandardNormal);
        *p = z / w.sqrt();
    }
}

/// Metropolis acceptance probability of one `n_steps` trajectory; 0 when
/// it diverges.
fn transition<F>(
    start: &PhasePoint,
    step: f64,
    n_steps: usize,
    inv_metric: &[f64],
    f: &F,
) -> (PhasePoint, f64, bool)
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    let h0 = start.hamiltonian(inv_metric);
    let mut end = start.clone();
    let finite = leapfrog(&mut end, step, n_steps, inv_metric, f);
    let h1 = end.hamiltonian(inv_metric);
    let energy_error = h1 - h0;
    let divergent = !finite || !h1.is_finite() || energy_error > MAX_ENERGY_ERROR;
    let accept = if divergent { 0.0 } else { (-energy_error).exp().min(1.0) };
    (end, accept, divergent)
}

/// Doubles or halves a unit-length step until the one-step acceptance
/// crosses 1/2.
fn find_reasonable_step<F>(
    point: &PhasePoint,
    inv_metric: &[f64],
    start: f64,
    rng: &mut ChaCha8Rng,
    f: &F,
) -> f64
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    let mut pt = point.clone();
    draw_momentum(rng, inv_metric, &mut pt.momentum);
    let mut step = start;
    let (_, a0, _) = transition(&pt, step, 1, inv_metric, f);
    let direction = if a0 > 0.5 { 1.0 } else { -1.0 };
    for _ in 0..60 {
        let next = step * 2f64.powf(direction);
        let (_, a, _) = transition(&pt, next, 1, inv_metric, f);
        let crossed = if direction > 0.0 { a <= 0.5 } else { a > 0.5 };
        step = next;
        if crossed {
            break;
        }
    }
    step
}

fn run_chain<T: Target>(target: &T, cfg: &SamplerConfig, chain: usize) -> Result<(Vec<Vec<f64>>, ChainStats)> {
    let mut rng = chain_rng(cfg.rng_seed, chain);
    let f = |t: &[f64], g: &mut [f64]| target.log_density_grad(t, g);
    let dim = target.dim();

    let mut current = initial_point(target, cfg, &mut rng)?;
    let mut inv_metric = vec![1.0; dim];
    let settings = DualAveragingSettings {
        target_accept: cfg.target_accept,
        ..DualAveragingSettings::default()
    };
    let schedule = WarmupSchedule::new(cfg.n_warmup);
    let mut step = find_reasonable_step(&current, &inv_metric, 1.0, &mut rng, &f);
    let mut da = DualAveraging::new(step, settings);
    let mut window = RunningVariance::new(dim);

    let mut draws = Vec::with_capacity(cfg.n_samples);
    let mut accept_sum = 0.0;
    let mut n_divergent = 0;
    let mut constrained = Vec::with_capacity(dim);

    for iter in 0..cfg.n_warmup + cfg.n_samples {
        let warmup = iter < cfg.n_warmup;
        if warmup {
            step = da.current();
        }
        let jittered = step * STEP_JITTER.powf(rng.random_range(-1.0..1.0));
        draw_momentum(&mut rng, &inv_metric, &mut current.momentum);
        let (proposal, accept, divergent) = transition(&current, jittered, cfg.n_leapfrog, &inv_metric, &f);
        let u: f64 = rng.random();
        if u < accept {
            current = proposal;
        }

        if warmup {
            da.update(accept);
            if schedule.in_window(iter) {
                window.push(&current.theta);
            }
            if schedule.is_window_end(iter) {
                inv_metric = window.regularized_variance();
                window = RunningVariance::new(dim);
                step = find_reasonable_step(&current, &inv_metric, da.current(), &mut rng, &f);
                da = DualAveraging::new(step, settings);
            }
            if iter + 1 == cfg.n_warmup {
                step = da.averaged();
            }
        } else {
            accept_sum += accept;
            n_divergent += usize::from(divergent);
            target.constrain(&current.theta, &mut constrained);
            draws.push(constrained.clone());
        }
    }

    Ok((
        draws,
        ChainStats {
            mean_accept: accept_sum / cfg.n_samples as f64,
            n_divergent,
            step_size: step,
            inv_metric,
        },
    ))
}
