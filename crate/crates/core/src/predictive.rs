//! Posterior-predictive bands per tool and holdout metrics.
//!
//! A Cauchy predictive has no moments, so bands are central quantiles.
//! Every band carries two sets of quantile curves: one for the location
//! `m_k x + c_k` alone (parameter uncertainty) and one for the full
//! predictive `y* ~ Cauchy(m_k x + c_k, gamma_k)`. The centre curve is the
//! posterior mean of the location.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution};
use serde::{Deserialize, Serialize};

use crate::data::GroupedDataset;
use crate::density::cauchy_with_grad;
use crate::diagnostics::quantile_sorted;
use crate::error::{Error, Result};
use crate::sampler::PosteriorSamples;

pub const DEFAULT_LEVELS: [f64; 4] = [0.025, 0.25, 0.75, 0.975];
pub const DEFAULT_GRID_POINTS: usize = 100;
/// Tools with at most this many training points are flagged as sparse.
pub const SPARSE_THRESHOLD: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandConfig {
    /// Quantile levels, strictly increasing in (0, 1).
    pub levels: Vec<f64>,
    /// Predictive draws per posterior draw.
    pub draws_per_sample: usize,
    pub seed: u64,
}

impl Default for BandConfig {
    fn default() -> Self {
        BandConfig {
            levels: DEFAULT_LEVELS.to_vec(),
            draws_per_sample: 1,
            seed: 0,
        }
    }
}

impl BandConfig {
    pub fn validate(&self) -> Result<()> {
        validate_levels(&self.levels)?;
        if self.draws_per_sample == 0 {
            return Err(Error::Config("draws_per_sample must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn validate_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::Config("at least one quantile level is required".into()));
    }
    if levels.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
        return Err(Error::Config(format!("levels must lie in (0, 1): {levels:?}")));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("levels must be strictly increasing: {levels:?}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveBand {
    pub tool: String,
    /// Query points in raw sliding-distance units.
    pub x: Vec<f64>,
    /// Posterior mean of the location at each query point.
    pub center: Vec<f64>,
    pub levels: Vec<f64>,
    /// `[level][grid point]` quantiles of the full predictive.
    pub predictive: Vec<Vec<f64>>,
    /// `[level][grid point]` quantiles of the location only.
    pub location: Vec<Vec<f64>>,
}

impl PredictiveBand {
    fn level_index(&self, level: f64) -> Option<usize> {
        self.levels.iter().position(|&l| (l - level).abs() < 1e-12)
    }

    /// Lower/upper predictive curves of the central `coverage` band.
    pub fn central(&self, coverage: f64) -> Result<(&[f64], &[f64])> {
        let lo = (1.0 - coverage) / 2.0;
        let (Some(i), Some(j)) = (self.level_index(lo), self.level_index(1.0 - lo)) else {
            return Err(Error::Config(format!(
                "band for `{}` lacks levels {lo} and {}",
                self.tool,
                1.0 - lo
            )));
        };
        Ok((&self.predictive[i], &self.predictive[j]))
    }

    /// Mean width of the central 95% predictive band over the grid.
    pub fn mean_width95(&self) -> Result<f64> {
        let (lo, hi) = self.central(0.95)?;
        Ok(lo.iter().zip(hi).map(|(a, b)| b - a).sum::<f64>() / lo.len() as f64)
    }

    /// Linear interpolation of `curve` at raw `x`; `None` outside the grid.
    pub fn interpolate(&self, curve: &[f64], x: f64) -> Option<f64> {
        interpolate(&self.x, curve, x)
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let (first, last) = (*xs.first()?, *xs.last()?);
    if x < first || x > last {
        return None;
    }
    if xs.len() == 1 {
        return Some(ys[0]);
    }
    let j = xs.partition_point(|&g| g <= x).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[j - 1], xs[j]);
    let t = (x - x0) / (x1 - x0);
    Some(ys[j - 1] + t * (ys[j] - ys[j - 1]))
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Default grid: [`DEFAULT_GRID_POINTS`] points over a tool's observed raw x range.
pub fn default_grid(data: &GroupedDataset, tool: &str) -> Result<Vec<f64>> {
    let g = data.group(tool).ok_or_else(|| Error::UnknownTool(tool.into()))?;
    let lo = g.obs.iter().map(|o| o.raw_x).fold(f64::INFINITY, f64::min);
    let hi = g.obs.iter().map(|o| o.raw_x).fold(f64::NEG_INFINITY, f64::max);
    if !(lo < hi) {
        return Err(Error::Data(format!("tool `{tool}` does not span an x range")));
    }
    Ok(linear_grid(lo, hi, DEFAULT_GRID_POINTS))
}

/// Per-draw `(m, c, gamma)` for one tool.
struct ToolDraws {
    m: Vec<f64>,
    c: Vec<f64>,
    gamma: Vec<f64>,
}

fn tool_draws(samples: &PosteriorSamples, tool: &str) -> Result<ToolDraws> {
    let col = |prefix: &str| {
        samples
            .column_by_name(&format!("{prefix}[{tool}]"))
            .ok_or_else(|| Error::UnknownTool(tool.into()))
    };
    Ok(ToolDraws {
        m: col("m")?,
        c: col("c")?,
        gamma: col("gamma")?,
    })
}

/// 64-bit FNV-1a; stable across builds, unlike `DefaultHasher`.
#[derive(Clone, Copy)]
struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
}

fn tool_stream(tool: &str) -> u64 {
    let mut h = Fnv::new();
    h.write(tool.as_bytes());
    h.0
}

/// Band for `tool` over raw query points `grid`.
///
/// Each posterior draw contributes `draws_per_sample` predictive values per
/// grid point. The standard Cauchy variates are shared across grid points
/// (common random numbers) so the curves are smooth in x.
pub fn predict_band(
    samples: &PosteriorSamples,
    tool: &str,
    grid: &[f64],
    cfg: &BandConfig,
) -> Result<PredictiveBand> {
    cfg.validate()?;
    if grid.is_empty() {
        return Err(Error::Config("empty query grid".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) || grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config("query grid must be finite and strictly increasing".into()));
    }
    let draws = tool_draws(samples, tool)?;
    let n = draws.m.len();
    if n == 0 {
        return Err(Error::Data("no posterior draws".into()));
    }
    let scaling = samples.meta.scaling;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(tool_stream(tool));
    let std_cauchy = Cauchy::new(0.0, 1.0).expect("unit Cauchy");
    let noise: Vec<f64> = (0..n * cfg.draws_per_sample)
        .map(|_| std_cauchy.sample(&mut rng))
        .collect();

    let n_levels = cfg.levels.len();
    let mut center = Vec::with_capacity(grid.len());
    let mut predictive = vec![Vec::with_capacity(grid.len()); n_levels];
    let mut location = vec![Vec::with_capacity(grid.len()); n_levels];
    let mut locs = vec![0.0; n];
    let mut ys = vec![0.0; noise.len()];
    for &raw in grid {
        let x = scaling.to_scaled(raw);
        for (l, (m, c)) in locs.iter_mut().zip(draws.m.iter().zip(&draws.c)) {
            *l = m * x + c;
        }
        center.push(locs.iter().sum::<f64>() / n as f64);
        for (s, (&loc, &g)) in locs.iter().zip(&draws.gamma).enumerate() {
            for r in 0..cfg.draws_per_sample {
                let i = s * cfg.draws_per_sample + r;
                ys[i] = loc + g * noise[i];
            }
        }
        ys.sort_by(f64::total_cmp);
        let mut sorted_locs = locs.clone();
        sorted_locs.sort_by(f64::total_cmp);
        for (i, &p) in cfg.levels.iter().enumerate() {
            predictive[i].push(quantile_sorted(&ys, p));
            location[i].push(quantile_sorted(&sorted_locs, p));
        }
    }
    Ok(PredictiveBand {
        tool: tool.to_string(),
        x: grid.to_vec(),
        center,
        levels: cfg.levels.clone(),
        predictive,
        location,
    })
}

/// Log of the draw-mixture predictive density at one raw point.
pub fn log_predictive_density(samples: &PosteriorSamples, tool: &str, raw_x: f64, y: f64) -> Result<f64> {
    let draws = tool_draws(samples, tool)?;
    Ok(mixture_log_density(&draws, samples.meta.scaling.to_scaled(raw_x), y))
}

fn mixture_log_density(draws: &ToolDraws, x: f64, y: f64) -> f64 {
    let terms: Vec<f64> = (0..draws.m.len())
        .map(|s| cauchy_with_grad(y, draws.m[s] * x + draws.c[s], draws.gamma[s]).value)
        .collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + (terms.iter().map(|t| (t - max).exp()).sum::<f64>() / terms.len() as f64).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolMetrics {
    pub tool: String,
    pub n_train: usize,
    pub n_holdout: usize,
    /// Mean absolute error of the centre curve on held-out points (μm).
    pub mae: Option<f64>,
    /// Fraction of held-out points inside the central 95% predictive band.
    pub coverage95: Option<f64>,
    /// Mean width of the central 95% predictive band over the tool's grid (μm).
    pub mean_width95: f64,
    /// Mean negative log predictive density of held-out points.
    pub nlpd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub tools: Vec<ToolMetrics>,
    /// Pooled over every held-out point; width averaged over tools.
    pub aggregate: ToolMetrics,
    /// Content hash of the holdout set, used to refuse mismatched comparisons.
    pub holdout_fingerprint: u64,
}

impl HoldoutReport {
    pub fn tool(&self, label: &str) -> Option<&ToolMetrics> {
        self.tools.iter().find(|t| t.tool == label)
    }
}

fn fingerprint(holdout: &GroupedDataset) -> u64 {
    let mut h = Fnv::new();
    for g in &holdout.groups {
        if g.obs.is_empty() {
            continue;
        }
        h.write(g.label.as_bytes());
        h.write(&[0xff]);
        for o in &g.obs {
            h.write(&o.raw_x.to_bits().to_le_bytes());
            h.write(&o.y.to_bits().to_le_bytes());
        }
    }
    h.0
}

#[derive(Default)]
struct Accum {
    n: usize,
    abs_err: f64,
    covered: usize,
    neg_log_dens: f64,
}

impl Accum {
    fn add(&mut self, other: &Accum) {
        self.n += other.n;
        self.abs_err += other.abs_err;
        self.covered += other.covered;
        self.neg_log_dens += other.neg_log_dens;
    }

    fn metrics(&self, tool: String, n_train: usize, width: f64) -> ToolMetrics {
        let per = |v: f64| (self.n > 0).then(|| v / self.n as f64);
        ToolMetrics {
            tool,
            n_train,
            n_holdout: self.n,
            mae: per(self.abs_err),
            coverage95: per(self.covered as f64),
            mean_width95: width,
            nlpd: per(self.neg_log_dens),
        }
    }
}

/// Scores `bands` (one per fitted tool) against held-out observations.
pub fn evaluate_holdout(
    samples: &PosteriorSamples,
    bands: &[PredictiveBand],
    holdout: &GroupedDataset,
) -> Result<HoldoutReport> {
    let mut tools = Vec::with_capacity(bands.len());
    let mut total = Accum::default();
    let mut width_sum = 0.0;
    for g in &holdout.groups {
        if !g.obs.is_empty() && !bands.iter().any(|b| b.tool == g.label) {
            return Err(Error::UnknownTool(g.label.clone()));
        }
    }
    for band in bands {
        let width = band.mean_width95()?;
        let (lo, hi) = band.central(0.95)?;
        let n_train = samples
            .meta
            .labels
            .iter()
            .position(|l| *l == band.tool)
            .and_then(|i| samples.meta.group_sizes.get(i).copied())
            .unwrap_or(0);
        let mut acc = Accum::default();
        if let Some(group) = holdout.group(&band.tool) {
            let draws = tool_draws(samples, &band.tool)?;
            for o in &group.obs {
                let outside = || {
                    Error::Data(format!(
                        "held-out x {} for tool `{}` lies outside the band grid",
                        o.raw_x, band.tool
                    ))
                };
                let center = band.interpolate(&band.center, o.raw_x).ok_or_else(outside)?;
                let lower = band.interpolate(lo, o.raw_x).ok_or_else(outside)?;
                let upper = band.interpolate(hi, o.raw_x).ok_or_else(outside)?;
                acc.n += 1;
                acc.abs_err += (o.y - center).abs();
                acc.covered += usize::from(o.y >= lower && o.y <= upper);
                let x = samples.meta.scaling.to_scaled(o.raw_x);
                acc.neg_log_dens -= mixture_log_density(&draws, x, o.y);
            }
        }
        total.add(&acc);
        width_sum += width;
        tools.push(acc.metrics(band.tool.clone(), n_train, width));
    }
    let n_train_total = tools.iter().map(|t| t.n_train).sum();
    let mean_width = if bands.is_empty() { 0.0 } else { width_sum / bands.len() as f64 };
    Ok(HoldoutReport {
        aggregate: total.metrics("all".into(), n_train_total, mean_width),
        tools,
        holdout_fingerprint: fingerprint(holdout),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub tool: String,
    pub sparse: bool,
    pub n_train: usize,
    pub n_holdout: usize,
    pub independent: ToolMetrics,
    pub hierarchical: ToolMetrics,
}

fn delta(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(b? - a?)
}

impl ComparisonRow {
    pub fn mae_delta(&self) -> Option<f64> {
        delta(self.independent.mae, self.hierarchical.mae)
    }

    pub fn coverage_delta(&self) -> Option<f64> {
        delta(self.independent.coverage95, self.hierarchical.coverage95)
    }

    pub fn width_delta(&self) -> f64 {
        self.hierarchical.mean_width95 - self.independent.mean_width95
    }

    /// Hierarchical over independent mean 95% band width.
    pub fn width_ratio(&self) -> f64 {
        self.hierarchical.mean_width95 / self.independent.mean_width95
    }

    pub fn nlpd_delta(&self) -> Option<f64> {
        delta(self.independent.nlpd, self.hierarchical.nlpd)
    }
}

/// Per-tool rows (hierarchical minus independent) followed by the aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub aggregate: ComparisonRow,
}

pub fn compare_models(independent: &HoldoutReport, hierarchical: &HoldoutReport) -> Result<Comparison> {
    if independent.holdout_fingerprint != hierarchical.holdout_fingerprint {
        return Err(Error::Structure("reports were scored on different holdout sets".into()));
    }
    if independent.tools.len() != hierarchical.tools.len() {
        return Err(Error::Structure("reports cover different tools".into()));
    }
    let row = |a: &ToolMetrics, b: &ToolMetrics| -> Result<ComparisonRow> {
        if a.tool != b.tool || a.n_holdout != b.n_holdout || a.n_train != b.n_train {
            return Err(Error::Structure(format!(
                "tool rows disagree: `{}` vs `{}`",
                a.tool, b.tool
            )));
        }
        Ok(ComparisonRow {
            tool: a.tool.clone(),
            sparse: a.n_train <= SPARSE_THRESHOLD,
            n_train: a.n_train,
            n_holdout: a.n_holdout,
            independent: a.clone(),
            hierarchical: b.clone(),
        })
    };
    let rows = independent
        .tools
        .iter()
        .zip(&hierarchical.tools)
        .map(|(a, b)| row(a, b))
        .collect::<Result<Vec<_>>>()?;
    let mut aggregate = row(&independent.aggregate, &hierarchical.aggregate)?;
    aggregate.sparse = false;
    Ok(Comparison { rows, aggregate })
}
