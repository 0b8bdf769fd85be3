//! Convergence diagnostics and posterior summaries.
//!
//! R-hat is the classic split statistic (no rank normalization). ESS follows
//! the multi-chain estimator with Geyer's initial monotone sequence over
//! split chains, capped at ten times the number of draws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::PosteriorSamples;

/// Upper bound on reported ESS as a multiple of the total draw count.
pub const ESS_CAP_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub value: f64,
    /// Set when the draws had no within-chain variance.
    pub degenerate: bool,
}

/// Type-7 (linear interpolation) quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sorts a copy and evaluates several type-7 quantiles.
pub fn quantiles(values: &[f64], probs: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    probs.iter().map(|&p| quantile_sorted(&sorted, p)).collect()
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Halves every chain (dropping the middle draw of odd-length chains),
/// after trimming all chains to the shortest length.
fn split_chains(chains: &[Vec<f64>]) -> Vec<&[f64]> {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    let half = n / 2;
    chains
        .iter()
        .flat_map(|c| [&c[..half], &c[n - half..n]])
        .collect()
}

/// Split R-hat of one parameter given per-chain draws.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<Diagnostic> {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if chains.is_empty() || n < 4 {
        return Err(Error::Data(format!(
            "split R-hat needs at least 4 draws per chain, got {n}"
        )));
    }
    let halves = split_chains(chains);
    let len = halves[0].len() as f64;
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let within = mean(&halves.iter().map(|h| sample_variance(h)).collect::<Vec<_>>());
    let between = len * sample_variance(&means);
    if within <= 0.0 {
        // Constant halves: identical means is a clean degenerate case, distinct
        // means means the chains are stuck in different places.
        let value = if between <= 0.0 { 1.0 } else { f64::INFINITY };
        return Ok(Diagnostic { value, degenerate: true });
    }
    let var_plus = (len - 1.0) / len * within + between / len;
    Ok(Diagnostic {
        value: (var_plus / within).sqrt(),
        degenerate: false,
    })
}

/// Autocovariance at `lag` with the biased (1/n) normalization.
fn autocovariance(x: &[f64], m: f64, lag: usize) -> f64 {
    let n = x.len();
    x[..n - lag]
        .iter()
        .zip(&x[lag..])
        .map(|(a, b)| (a - m) * (b - m))
        .sum::<f64>()
        / n as f64
}

/// Effective sample size of one parameter given per-chain draws (a single
/// chain is fine).
pub fn ess_bulk(chains: &[Vec<f64>]) -> Result<Diagnostic> {
    let n_min = chains.iter().map(Vec::len).min().unwrap_or(0);
    let total = n_min * chains.len();
    if chains.is_empty() || total < 8 || n_min < 4 {
        return Err(Error::Data(format!("ESS needs at least 8 draws, got {total}")));
    }
    let halves = split_chains(chains);
    let m = halves.len() as f64;
    let n = halves[0].len();
    let nf = n as f64;
    let n_total = m * nf;

    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let acov0: Vec<f64> = halves
        .iter()
        .zip(&means)
        .map(|(h, &mu)| autocovariance(h, mu, 0))
        .collect();
    let within = mean(&acov0) * nf / (nf - 1.0);
    let between_over_n = if halves.len() > 1 { sample_variance(&means) } else { 0.0 };
    let var_plus = within * (nf - 1.0) / nf + between_over_n;
    if !(var_plus > 0.0) {
        return Ok(Diagnostic {
            value: n_total,
            degenerate: true,
        });
    }

    let rho = |lag: usize| -> f64 {
        let mean_acov = halves
            .iter()
            .zip(&means)
            .map(|(h, &mu)| autocovariance(h, mu, lag))
            .sum::<f64>()
            / m;
        1.0 - (within - mean_acov) / var_plus
    };

    // Geyer: sum consecutive pairs while positive, forcing them monotone.
    let mut sum_pairs = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        sum_pairs += pair;
        prev_pair = pair;
        lag += 2;
    }
    let tau = -1.0 + 2.0 * sum_pairs;
    let cap = ESS_CAP_FACTOR * n_total;
    let ess = if tau > 0.0 { (n_total / tau).min(cap) } else { cap };
    Ok(Diagnostic {
        value: ess,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub median: f64,
    pub q025: f64,
    pub q25: f64,
    pub q75: f64,
    pub q975: f64,
    pub sd: f64,
    /// Monte Carlo standard error of the mean, `sd / sqrt(ess)`.
    pub mcse_mean: f64,
    pub rhat: Option<Diagnostic>,
    pub ess_bulk: Option<Diagnostic>,
}

impl ParameterSummary {
    /// R-hat value, treating too-short chains as converged.
    pub fn rhat_value(&self) -> f64 {
        self.rhat.map_or(1.0, |d| d.value)
    }
}

/// One summary per named parameter. R-hat and ESS are `None` when there are
/// too few draws to compute them.
pub fn summarize(samples: &PosteriorSamples) -> Vec<ParameterSummary> {
    (0..samples.names.len())
        .map(|p| summarize_one(&samples.names[p], &samples.chain_column(p)))
        .collect()
}

pub fn summarize_one(name: &str, chains: &[Vec<f64>]) -> ParameterSummary {
    let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let q = |p| quantile_sorted(&sorted, p);
    let mean = mean(&sorted);
    let sd = if sorted.len() > 1 { sample_variance(&sorted).sqrt() } else { 0.0 };
    let rhat = split_rhat(chains).ok();
    let ess = ess_bulk(chains).ok();
    let mcse_mean = match ess {
        Some(e) if e.value > 0.0 => sd / e.value.sqrt(),
        _ => sd / (sorted.len() as f64).sqrt(),
    };
    ParameterSummary {
        name: name.to_string(),
        mean,
        median: q(0.5),
        q025: q(0.025),
        q25: q(0.25),
        q75: q(0.75),
        q975: q(0.975),
        sd,
        mcse_mean,
        rhat,
        ess_bulk: ess,
    }
}

/// Largest split R-hat across summaries.
pub fn max_rhat(summaries: &[ParameterSummary]) -> f64 {
    summaries
        .iter()
        .map(ParameterSummary::rhat_value)
        .fold(1.0, f64::max)
}
