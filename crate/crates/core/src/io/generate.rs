//! Synthetic tool fleets drawn from the hierarchical model's population.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{GroupedDataset, RawRecord};
use crate::error::{Error, Result};
use crate::model::{GroupParams, HyperParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    Cauchy,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_tools: usize,
    pub per_tool: usize,
    /// Population the per-tool lines are drawn from (slopes per unit scaled x).
    pub truth: HyperParams,
    pub noise: NoiseFamily,
    /// Raw sliding-distance range; every tool is observed at `per_tool`
    /// evenly spaced points spanning it.
    pub x_min: f64,
    pub x_max: f64,
    /// Probability that an observation is shifted up by `outlier_shift`.
    pub outlier_rate: f64,
    pub outlier_shift: f64,
    /// Truncation window for `gamma_k ~ HalfCauchy(gamma_pop)`; `None` draws
    /// from the untruncated distribution.
    pub gamma_bounds: Option<(f64, f64)>,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_tools: 7,
            per_tool: 20,
            truth: HyperParams {
                mu_m: 0.5,
                sigma_m: 0.1,
                mu_c: 0.35,
                sigma_c: 0.08,
                gamma_pop: 0.04,
            },
            noise: NoiseFamily::Cauchy,
            x_min: 0.0,
            x_max: 150.0,
            outlier_rate: 0.0,
            outlier_shift: 10.0,
            gamma_bounds: Some((0.01, 1.0)),
            seed: 1,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_tools < 1 || self.per_tool < 1 {
            return bad("n_tools and per_tool must be at least 1".into());
        }
        let h = &self.truth;
        for (name, v) in [("sigma_m", h.sigma_m), ("sigma_c", h.sigma_c), ("gamma_pop", h.gamma_pop)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(h.mu_m.is_finite() && h.mu_c.is_finite()) {
            return bad("population locations must be finite".into());
        }
        if !(self.x_min >= 0.0 && self.x_max > self.x_min && self.x_max.is_finite()) {
            return bad(format!("invalid x range [{}, {}]", self.x_min, self.x_max));
        }
        if !(0.0..1.0).contains(&self.outlier_rate) || !self.outlier_shift.is_finite() {
            return bad(format!("outlier rate must lie in [0, 1), got {}", self.outlier_rate));
        }
        if let Some((lo, hi)) = self.gamma_bounds {
            if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
                return bad(format!("invalid gamma bounds ({lo}, {hi})"));
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<String> {
        (1..=self.n_tools).map(|k| k.to_string()).collect()
    }
}

/// The parameters a fleet was generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetTruth {
    pub labels: Vec<String>,
    pub groups: Vec<GroupParams>,
    pub hyper: HyperParams,
}

/// `HalfCauchy(scale)` restricted to `[lo, hi]` by inverting the CDF
/// `F(x) = (2/pi) atan(x / scale)`.
fn truncated_half_cauchy(rng: &mut impl Rng, scale: f64, bounds: Option<(f64, f64)>) -> f64 {
    let (lo, hi) = bounds.unwrap_or((0.0, f64::INFINITY));
    let cdf = |x: f64| (x / scale).atan() / FRAC_PI_2;
    let (a, b) = (cdf(lo), cdf(hi));
    let u = a + (b - a) * rng.random::<f64>();
    (scale * (u * FRAC_PI_2).tan()).clamp(lo, hi).max(f64::MIN_POSITIVE)
}

const NEGATIVE_RESAMPLES: usize = 1000;

/// Draws a fleet and returns it with the truth it came from.
///
/// Roughness values below zero are redrawn (the noise is truncated at the
/// physical bound), then outliers are injected.
pub fn generate_fleet(cfg: &GeneratorConfig) -> Result<(GroupedDataset, FleetTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let h = cfg.truth;
    let slope = Cauchy::new(h.mu_m, h.sigma_m).map_err(|e| Error::Config(e.to_string()))?;
    let intercept = Cauchy::new(h.mu_c, h.sigma_c).map_err(|e| Error::Config(e.to_string()))?;

    let groups: Vec<GroupParams> = (0..cfg.n_tools)
        .map(|_| GroupParams {
            m: slope.sample(&mut rng),
            c: intercept.sample(&mut rng),
            gamma: truncated_half_cauchy(&mut rng, h.gamma_pop, cfg.gamma_bounds),
        })
        .collect();

    let labels = cfg.labels();
    let n = cfg.per_tool;
    let mut records = Vec::with_capacity(cfg.n_tools * n);
    for (label, p) in labels.iter().zip(&groups) {
        let noise_sample = |rng: &mut ChaCha8Rng| -> f64 {
            match cfg.noise {
                NoiseFamily::Cauchy => p.gamma * Cauchy::new(0.0, 1.0).unwrap().sample(rng),
                NoiseFamily::Gaussian => p.gamma * Normal::new(0.0, 1.0).unwrap().sample(rng),
            }
        };
        for i in 0..n {
            let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
            let raw_x = cfg.x_min + (cfg.x_max - cfg.x_min) * t;
            let loc = p.m * t + p.c;
            let mut y = loc + noise_sample(&mut rng);
            for _ in 0..NEGATIVE_RESAMPLES {
                if y >= 0.0 {
                    break;
                }
                y = loc + noise_sample(&mut rng);
            }
            let mut y = y.max(0.0);
            if cfg.outlier_rate > 0.0 && rng.random::<f64>() < cfg.outlier_rate {
                y += cfg.outlier_shift;
            }
            records.push(RawRecord {
                tool_id: label.clone(),
                sliding_distance: raw_x,
                roughness_ra: y,
            });
        }
    }
    let data = GroupedDataset::from_records(&records)?;
    Ok((
        data,
        FleetTruth {
            labels,
            groups,
            hyper: h,
        },
    ))
}
