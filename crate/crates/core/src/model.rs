//! Parameter layout, constraint transforms and exact log posteriors for the
//! independent and hierarchical models.
//!
//! Both models share the likelihood `y_ik ~ Cauchy(m_k x_ik + c_k, gamma_k)`.
//! The independent model gives every tool fixed priors
//! `m_k ~ Cauchy(mu_m_loc, mu_m_scale)`, `c_k ~ Cauchy(mu_c_loc, mu_c_scale)`,
//! `gamma_k ~ HalfCauchy(gamma_scale)`. The hierarchical model replaces them
//! with population distributions
//!
//! ```text
//! m_k     ~ Cauchy(mu_m, sigma_m)      mu_m    ~ Cauchy(mu_m_loc, mu_m_scale)
//!                                      sigma_m ~ HalfCauchy(sigma_m_scale)
//! c_k     ~ Cauchy(mu_c, sigma_c)      mu_c    ~ Cauchy(mu_c_loc, mu_c_scale)
//!                                      sigma_c ~ HalfCauchy(sigma_c_scale)
//! gamma_k ~ HalfCauchy(gamma)          gamma   ~ HalfCauchy(gamma_scale)
//! ```
//!
//! Positive parameters are sampled on the log scale; each log-transformed
//! coordinate `u` contributes its Jacobian term `u` to the log density.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::GroupedDataset;
use crate::density::{cauchy_with_grad, half_cauchy_with_grad};
use crate::error::{Error, Result};
use crate::sampler::{SampleMeta, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Independent,
    Hierarchical,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Independent => "independent",
            ModelKind::Hierarchical => "hierarchical",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(ModelKind::Independent),
            "hierarchical" => Ok(ModelKind::Hierarchical),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Per-tool slope, intercept and likelihood scale (scaled-x units for `m`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupParams {
    pub m: f64,
    pub c: f64,
    pub gamma: f64,
}

/// Population-level parameters of the hierarchical model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub mu_m: f64,
    pub sigma_m: f64,
    pub mu_c: f64,
    pub sigma_c: f64,
    pub gamma_pop: f64,
}

/// Fixed locations and scales of the top-level priors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperConfig {
    pub mu_m_loc: f64,
    pub mu_m_scale: f64,
    pub sigma_m_scale: f64,
    pub mu_c_loc: f64,
    pub mu_c_scale: f64,
    pub sigma_c_scale: f64,
    pub gamma_scale: f64,
}

impl Default for HyperConfig {
    fn default() -> Self {
        HyperConfig {
            mu_m_loc: 0.0,
            mu_m_scale: 1.0,
            sigma_m_scale: 1.0,
            mu_c_loc: 0.0,
            mu_c_scale: 1.0,
            sigma_c_scale: 1.0,
            gamma_scale: 1.0,
        }
    }
}

impl HyperConfig {
    pub fn validate(&self) -> Result<()> {
        let scales = [
            ("mu_m_scale", self.mu_m_scale),
            ("sigma_m_scale", self.sigma_m_scale),
            ("mu_c_scale", self.mu_c_scale),
            ("sigma_c_scale", self.sigma_c_scale),
            ("gamma_scale", self.gamma_scale),
        ];
        for (name, v) in scales {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.mu_m_loc.is_finite() && self.mu_c_loc.is_finite()) {
            return Err(Error::Config("prior locations must be finite".into()));
        }
        Ok(())
    }
}

/// `m * x + c`.
#[inline]
pub fn location(params: &GroupParams, x: f64) -> f64 {
    params.m * x + params.c
}

/// Index map of the flat unconstrained parameter vector.
///
/// Order: `m[0..K]`, `c[0..K]`, `log gamma[0..K]`, then for the hierarchical
/// model `mu_m, log sigma_m, mu_c, log sigma_c, log gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub kind: ModelKind,
    pub n_groups: usize,
}

impl Layout {
    pub const N_HYPER: usize = 5;

    pub fn new(kind: ModelKind, n_groups: usize) -> Self {
        Layout { kind, n_groups }
    }

    pub fn len(&self) -> usize {
        match self.kind {
            ModelKind::Independent => 3 * self.n_groups,
            ModelKind::Hierarchical => 3 * self.n_groups + Self::N_HYPER,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slope(&self, k: usize) -> usize {
        k
    }

    pub fn intercept(&self, k: usize) -> usize {
        self.n_groups + k
    }

    pub fn log_gamma(&self, k: usize) -> usize {
        2 * self.n_groups + k
    }

    /// Start of the hyperparameter block (meaningful for hierarchical only).
    pub fn hyper_start(&self) -> usize {
        3 * self.n_groups
    }

    /// Whether coordinate `i` is a log-transformed positive parameter.
    pub fn is_log_scale(&self, i: usize) -> bool {
        let k = self.n_groups;
        if (2 * k..3 * k).contains(&i) {
            return true;
        }
        let h = self.hyper_start();
        self.kind == ModelKind::Hierarchical && matches!(i.checked_sub(h), Some(1 | 3 | 4))
    }

    /// Names of the constrained parameters, e.g. `m[3]`, `gamma[3]`, `sigma_m`.
    pub fn param_names(&self, labels: &[String]) -> Vec<String> {
        let mut names = Vec::with_capacity(self.len());
        for prefix in ["m", "c", "gamma"] {
            names.extend(labels.iter().map(|l| format!("{prefix}[{l}]")));
        }
        if self.kind == ModelKind::Hierarchical {
            names.extend(
                ["mu_m", "sigma_m", "mu_c", "sigma_c", "gamma"]
                    .iter()
                    .map(|s| s.to_string()),
            );
        }
        names
    }

    /// Maps unconstrained values to the constrained scale in place order.
    pub fn constrain_slice(&self, theta: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(theta.iter().enumerate().map(|(i, &v)| {
            if self.is_log_scale(i) {
                v.exp()
            } else {
                v
            }
        }));
    }
}

/// Flat unconstrained parameter vector tagged with its layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub values: Vec<f64>,
    pub layout: Layout,
}

impl ParameterVector {
    pub fn new(layout: Layout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::Structure(format!(
                "{} model with {} groups needs {} parameters, got {}",
                layout.kind,
                layout.n_groups,
                layout.len(),
                values.len()
            )));
        }
        Ok(ParameterVector { values, layout })
    }

    pub fn zeros(layout: Layout) -> Self {
        ParameterVector {
            values: vec![0.0; layout.len()],
            layout,
        }
    }

    /// Inverse of [`ParameterVector::constrain`].
    pub fn unconstrain(groups: &[GroupParams], hyper: Option<&HyperParams>) -> Result<Self> {
        let k = groups.len();
        let kind = if hyper.is_some() {
            ModelKind::Hierarchical
        } else {
            ModelKind::Independent
        };
        let layout = Layout::new(kind, k);
        let mut values = vec![0.0; layout.len()];
        for (i, g) in groups.iter().enumerate() {
            values[layout.slope(i)] = g.m;
            values[layout.intercept(i)] = g.c;
            values[layout.log_gamma(i)] = positive_log("gamma", g.gamma)?;
        }
        if let Some(h) = hyper {
            let s = layout.hyper_start();
            values[s] = h.mu_m;
            values[s + 1] = positive_log("sigma_m", h.sigma_m)?;
            values[s + 2] = h.mu_c;
            values[s + 3] = positive_log("sigma_c", h.sigma_c)?;
            values[s + 4] = positive_log("gamma_pop", h.gamma_pop)?;
        }
        Ok(ParameterVector { values, layout })
    }

    /// Group parameters and, for the hierarchical model, hyperparameters on
    /// the constrained scale. Scales come out as `exp(u)`, which is strictly
    /// positive for every finite `u` above the underflow limit.
    pub fn constrain(&self) -> (Vec<GroupParams>, Option<HyperParams>) {
        let l = &self.layout;
        let v = &self.values;
        let groups = (0..l.n_groups)
            .map(|k| GroupParams {
                m: v[l.slope(k)],
                c: v[l.intercept(k)],
                gamma: v[l.log_gamma(k)].exp(),
            })
            .collect();
        let hyper = (l.kind == ModelKind::Hierarchical).then(|| {
            let s = l.hyper_start();
            HyperParams {
                mu_m: v[s],
                sigma_m: v[s + 1].exp(),
                mu_c: v[s + 2],
                sigma_c: v[s + 3].exp(),
                gamma_pop: v[s + 4].exp(),
            }
        });
        (groups, hyper)
    }
}

fn positive_log(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v.ln())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Sum of Cauchy log likelihood terms over every observation.
pub fn log_likelihood(data: &GroupedDataset, params: &[GroupParams]) -> Result<f64> {
    if params.len() != data.n_groups() {
        return Err(Error::Structure(format!(
            "{} parameter sets for {} groups",
            params.len(),
            data.n_groups()
        )));
    }
    let mut total = 0.0;
    for (g, p) in data.groups.iter().zip(params) {
        if !(p.gamma > 0.0) {
            return Err(Error::Domain(format!(
                "gamma for tool `{}` must be positive, got {}",
                g.label, p.gamma
            )));
        }
        total += g
            .obs
            .iter()
            .map(|o| cauchy_with_grad(o.y, location(p, o.x), p.gamma).value)
            .sum::<f64>();
    }
    Ok(total)
}

fn check_layout(theta: &ParameterVector, data: &GroupedDataset, kind: Option<ModelKind>) -> Result<()> {
    let l = theta.layout;
    if let Some(kind) = kind {
        if l.kind != kind {
            return Err(Error::Structure(format!(
                "expected a {kind} parameter vector, got {}",
                l.kind
            )));
        }
    }
    if l.n_groups != data.n_groups() {
        return Err(Error::Structure(format!(
            "parameter layout has {} groups, data has {}",
            l.n_groups,
            data.n_groups()
        )));
    }
    if theta.values.len() != l.len() {
        return Err(Error::Structure(format!(
            "parameter vector length {} does not match layout length {}",
            theta.values.len(),
            l.len()
        )));
    }
    Ok(())
}

pub fn log_posterior_independent(
    theta: &ParameterVector,
    data: &GroupedDataset,
    config: &HyperConfig,
) -> Result<f64> {
    check_layout(theta, data, Some(ModelKind::Independent))?;
    Ok(evaluate(&theta.layout, &theta.values, data, config, None))
}

pub fn log_posterior_hierarchical(
    theta: &ParameterVector,
    data: &GroupedDataset,
    config: &HyperConfig,
) -> Result<f64> {
    check_layout(theta, data, Some(ModelKind::Hierarchical))?;
    Ok(evaluate(&theta.layout, &theta.values, data, config, None))
}

/// Log posterior of whichever model `theta` is laid out for.
pub fn log_posterior(theta: &ParameterVector, data: &GroupedDataset, config: &HyperConfig) -> Result<f64> {
    check_layout(theta, data, None)?;
    Ok(evaluate(&theta.layout, &theta.values, data, config, None))
}

/// Analytic gradient in unconstrained coordinates.
pub fn grad_log_posterior(
    theta: &ParameterVector,
    data: &GroupedDataset,
    config: &HyperConfig,
) -> Result<Vec<f64>> {
    check_layout(theta, data, None)?;
    let mut grad = vec![0.0; theta.values.len()];
    evaluate(&theta.layout, &theta.values, data, config, Some(&mut grad));
    Ok(grad)
}

/// Shared value/gradient kernel. `grad`, when given, is overwritten.
fn evaluate(
    layout: &Layout,
    theta: &[f64],
    data: &GroupedDataset,
    cfg: &HyperConfig,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    let hier = layout.kind == ModelKind::Hierarchical;
    let h0 = layout.hyper_start();
    let (mu_m, log_sigma_m, mu_c, log_sigma_c, log_gamma_pop) = if hier {
        (theta[h0], theta[h0 + 1], theta[h0 + 2], theta[h0 + 3], theta[h0 + 4])
    } else {
        (0.0, 0.0, 0.0, 0.0, 0.0)
    };
    let sigma_m = log_sigma_m.exp();
    let sigma_c = log_sigma_c.exp();
    let gamma_pop = log_gamma_pop.exp();

    // Accumulated partials with respect to the constrained hyperparameters.
    let (mut d_mu_m, mut d_sigma_m, mut d_mu_c, mut d_sigma_c, mut d_gamma_pop) =
        (0.0, 0.0, 0.0, 0.0, 0.0);

    let mut lp = 0.0;
    for (k, group) in data.groups.iter().enumerate() {
        let m = theta[layout.slope(k)];
        let c = theta[layout.intercept(k)];
        let log_gamma = theta[layout.log_gamma(k)];
        let gamma = log_gamma.exp();

        let (mut d_m, mut d_c, mut d_gamma) = (0.0, 0.0, 0.0);
        for o in &group.obs {
            let t = cauchy_with_grad(o.y, m * o.x + c, gamma);
            lp += t.value;
            d_m += t.d_loc * o.x;
            d_c += t.d_loc;
            d_gamma += t.d_scale;
        }

        if hier {
            let tm = cauchy_with_grad(m, mu_m, sigma_m);
            let tc = cauchy_with_grad(c, mu_c, sigma_c);
            let tg = half_cauchy_with_grad(gamma, gamma_pop);
            lp += tm.value + tc.value + tg.value;
            d_m += tm.d_x;
            d_mu_m += tm.d_loc;
            d_sigma_m += tm.d_scale;
            d_c += tc.d_x;
            d_mu_c += tc.d_loc;
            d_sigma_c += tc.d_scale;
            d_gamma += tg.d_x;
            d_gamma_pop += tg.d_scale;
        } else {
            let tm = cauchy_with_grad(m, cfg.mu_m_loc, cfg.mu_m_scale);
            let tc = cauchy_with_grad(c, cfg.mu_c_loc, cfg.mu_c_scale);
            let tg = half_cauchy_with_grad(gamma, cfg.gamma_scale);
            lp += tm.value + tc.value + tg.value;
            d_m += tm.d_x;
            d_c += tc.d_x;
            d_gamma += tg.d_x;
        }
        lp += log_gamma;

        if let Some(g) = grad.as_deref_mut() {
            g[layout.slope(k)] = d_m;
            g[layout.intercept(k)] = d_c;
            g[layout.log_gamma(k)] = d_gamma * gamma + 1.0;
        }
    }

    if hier {
        let t_mu_m = cauchy_with_grad(mu_m, cfg.mu_m_loc, cfg.mu_m_scale);
        let t_sigma_m = half_cauchy_with_grad(sigma_m, cfg.sigma_m_scale);
        let t_mu_c = cauchy_with_grad(mu_c, cfg.mu_c_loc, cfg.mu_c_scale);
        let t_sigma_c = half_cauchy_with_grad(sigma_c, cfg.sigma_c_scale);
        let t_gamma = half_cauchy_with_grad(gamma_pop, cfg.gamma_scale);
        lp += t_mu_m.value + t_sigma_m.value + t_mu_c.value + t_sigma_c.value + t_gamma.value;
        lp += log_sigma_m + log_sigma_c + log_gamma_pop;

        if let Some(g) = grad {
            g[h0] = d_mu_m + t_mu_m.d_x;
            g[h0 + 1] = (d_sigma_m + t_sigma_m.d_x) * sigma_m + 1.0;
            g[h0 + 2] = d_mu_c + t_mu_c.d_x;
            g[h0 + 3] = (d_sigma_c + t_sigma_c.d_x) * sigma_c + 1.0;
            g[h0 + 4] = (d_gamma_pop + t_gamma.d_x) * gamma_pop + 1.0;
        }
    }
    lp
}

/// A model bound to its data: the sampler's target for either kind.
#[derive(Debug, Clone)]
pub struct Posterior {
    layout: Layout,
    data: GroupedDataset,
    config: HyperConfig,
}

impl Posterior {
    pub fn new(kind: ModelKind, data: &GroupedDataset, config: &HyperConfig) -> Result<Self> {
        config.validate()?;
        Ok(Posterior {
            layout: Layout::new(kind, data.n_groups()),
            data: data.clone(),
            config: *config,
        })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn data(&self) -> &GroupedDataset {
        &self.data
    }

    pub fn config(&self) -> &HyperConfig {
        &self.config
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        evaluate(&self.layout, theta, &self.data, &self.config, None)
    }
}

impl Target for Posterior {
    fn dim(&self) -> usize {
        self.layout.len()
    }

    fn log_density_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        evaluate(&self.layout, theta, &self.data, &self.config, Some(grad))
    }

    fn param_names(&self) -> Vec<String> {
        self.layout.param_names(&self.data.labels())
    }

    fn constrain(&self, theta: &[f64], out: &mut Vec<f64>) {
        self.layout.constrain_slice(theta, out);
    }

    fn meta(&self) -> SampleMeta {
        SampleMeta {
            kind: Some(self.layout.kind),
            labels: self.data.labels(),
            group_sizes: self.data.group_sizes(),
            scaling: self.data.scaling,
        }
    }
}
