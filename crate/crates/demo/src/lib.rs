//! Browser front end: generate a fleet, run the sparse-tool comparison and
//! plot likelihood curves. Every export takes and returns JSON strings.

use pooled_wear::density::cauchy_with_grad;
use pooled_wear::experiment::{run_experiment, ExperimentConfig, ModelRun};
use pooled_wear::io::{generate_fleet, FleetTruth, GeneratorConfig};
use pooled_wear::predictive::{linear_grid, BandConfig, Comparison};
use pooled_wear::{GroupedDataset, SamplerConfig};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::wasm_bindgen;

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct FleetParams {
    pub seed: u64,
    pub tools: usize,
    pub per_tool: usize,
    pub outlier_rate: f64,
}

impl Default for FleetParams {
    fn default() -> Self {
        FleetParams {
            seed: 1,
            tools: 7,
            per_tool: 20,
            outlier_rate: 0.0,
        }
    }
}

impl FleetParams {
    fn config(&self) -> GeneratorConfig {
        GeneratorConfig {
            n_tools: self.tools,
            per_tool: self.per_tool,
            outlier_rate: self.outlier_rate,
            seed: self.seed,
            ..GeneratorConfig::default()
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct ExperimentParams {
    #[serde(flatten)]
    pub fleet: FleetParams,
    pub n_visible: usize,
    /// Defaults to the last two tools.
    pub sparse: Vec<String>,
    pub chains: usize,
    pub warmup: usize,
    pub samples: usize,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        ExperimentParams {
            fleet: FleetParams::default(),
            n_visible: 5,
            sparse: Vec::new(),
            chains: 2,
            warmup: 400,
            samples: 400,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Serialize)]
pub struct ToolPoints {
    pub tool: String,
    pub points: Vec<Point>,
}

#[derive(Debug, Serialize)]
pub struct Fleet {
    pub tools: Vec<ToolPoints>,
    pub truth: FleetTruth,
}

fn points(data: &GroupedDataset) -> Vec<ToolPoints> {
    data.groups
        .iter()
        .map(|g| ToolPoints {
            tool: g.label.clone(),
            points: g.obs.iter().map(|o| Point { x: o.raw_x, y: o.y }).collect(),
        })
        .collect()
}

pub fn fleet(params: &FleetParams) -> pooled_wear::Result<Fleet> {
    let (data, truth) = generate_fleet(&params.config())?;
    Ok(Fleet {
        tools: points(&data),
        truth,
    })
}

/// 95% and 50% predictive curves of one tool.
#[derive(Debug, Serialize)]
pub struct Band {
    pub tool: String,
    pub x: Vec<f64>,
    pub center: Vec<f64>,
    pub lo95: Vec<f64>,
    pub lo50: Vec<f64>,
    pub hi50: Vec<f64>,
    pub hi95: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct ModelView {
    pub kind: String,
    pub max_rhat: f64,
    pub bands: Vec<Band>,
}

#[derive(Debug, Serialize)]
pub struct Row {
    pub tool: String,
    pub sparse: bool,
    pub width_independent: f64,
    pub width_hierarchical: f64,
    pub nlpd_independent: Option<f64>,
    pub nlpd_hierarchical: Option<f64>,
    pub coverage_independent: Option<f64>,
    pub coverage_hierarchical: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct ExperimentView {
    pub sparse: Vec<String>,
    pub train: Vec<ToolPoints>,
    pub holdout: Vec<ToolPoints>,
    pub independent: ModelView,
    pub hierarchical: ModelView,
    pub rows: Vec<Row>,
}

fn model_view(run: &ModelRun) -> ModelView {
    let bands = run
        .bands
        .iter()
        .map(|b| Band {
            tool: b.tool.clone(),
            x: b.x.clone(),
            center: b.center.clone(),
            lo95: b.predictive[0].clone(),
            lo50: b.predictive[1].clone(),
            hi50: b.predictive[2].clone(),
            hi95: b.predictive[3].clone(),
        })
        .collect();
    ModelView {
        kind: run.kind.to_string(),
        max_rhat: pooled_wear::diagnostics::max_rhat(&run.summaries),
        bands,
    }
}

fn rows(cmp: &Comparison) -> Vec<Row> {
    cmp.rows
        .iter()
        .chain(std::iter::once(&cmp.aggregate))
        .map(|r| Row {
            tool: r.tool.clone(),
            sparse: r.sparse,
            width_independent: r.independent.mean_width95,
            width_hierarchical: r.hierarchical.mean_width95,
            nlpd_independent: r.independent.nlpd,
            nlpd_hierarchical: r.hierarchical.nlpd,
            coverage_independent: r.independent.coverage95,
            coverage_hierarchical: r.hierarchical.coverage95,
        })
        .collect()
}

pub fn experiment(params: &ExperimentParams) -> pooled_wear::Result<ExperimentView> {
    let (data, _) = generate_fleet(&params.fleet.config())?;
    let defaults = ExperimentConfig::for_dataset(&data);
    let cfg = ExperimentConfig {
        sparse: if params.sparse.is_empty() { defaults.sparse } else { params.sparse.clone() },
        n_visible: params.n_visible,
        sampler: SamplerConfig {
            n_chains: params.chains,
            n_warmup: params.warmup,
            n_samples: params.samples,
            rng_seed: params.fleet.seed,
            ..SamplerConfig::default()
        },
        bands: BandConfig {
            seed: params.fleet.seed,
            ..BandConfig::default()
        },
        ..defaults
    };
    let r = run_experiment(&data, &cfg)?;
    Ok(ExperimentView {
        sparse: cfg.sparse,
        train: points(&r.train),
        holdout: points(&r.holdout),
        independent: model_view(&r.independent),
        hierarchical: model_view(&r.hierarchical),
        rows: rows(&r.comparison),
    })
}

#[derive(Debug, Serialize)]
pub struct Curves {
    pub residual: Vec<f64>,
    pub cauchy: Vec<f64>,
    pub gaussian: Vec<f64>,
    /// Derivative of the log density in the residual: how hard a point pulls the line.
    pub cauchy_pull: Vec<f64>,
    pub gaussian_pull: Vec<f64>,
}

/// Log densities of a residual under Cauchy and normal noise of equal scale.
pub fn likelihood_curves(scale: f64, range: f64) -> pooled_wear::Result<Curves> {
    if !(scale > 0.0 && scale.is_finite() && range > 0.0 && range.is_finite()) {
        return Err(pooled_wear::Error::Config(format!("scale and range must be positive, got {scale}, {range}")));
    }
    let residual = linear_grid(-range, range, 401);
    let half_log_two_pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let cauchy = residual.iter().map(|&r| cauchy_with_grad(r, 0.0, scale).value).collect();
    let gaussian = residual
        .iter()
        .map(|&r| -half_log_two_pi - scale.ln() - 0.5 * (r / scale).powi(2))
        .collect();
    let cauchy_pull = residual.iter().map(|&r| cauchy_with_grad(r, 0.0, scale).d_loc).collect();
    let gaussian_pull = residual.iter().map(|&r| r / (scale * scale)).collect();
    Ok(Curves {
        residual,
        cauchy,
        gaussian,
        cauchy_pull,
        gaussian_pull,
    })
}

fn respond<T: Serialize>(r: pooled_wear::Result<T>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).expect("serializable view"),
        Err(e) => serde_json::json!({ "error": e.to_string() }).to_string(),
    }
}

fn parse<T: for<'de> Deserialize<'de> + Default>(json: &str) -> pooled_wear::Result<T> {
    if json.trim().is_empty() {
        return Ok(T::default());
    }
    serde_json::from_str(json).map_err(|e| pooled_wear::Error::Config(format!("bad parameters: {e}")))
}

#[wasm_bindgen]
pub fn generate(params: &str) -> String {
    respond(parse::<FleetParams>(params).and_then(|p| fleet(&p)))
}

#[wasm_bindgen]
pub fn compare(params: &str) -> String {
    respond(parse::<ExperimentParams>(params).and_then(|p| experiment(&p)))
}

#[wasm_bindgen]
pub fn curves(scale: f64, range: f64) -> String {
    respond(likelihood_curves(scale, range))
}
