//! The sparse-tool comparison end to end: split, fit both models, build
//! bands on every tool, score the holdout and tabulate the differences.

use crate::data::GroupedDataset;
use crate::diagnostics::{summarize, ParameterSummary};
use crate::error::Result;
use crate::io::split_sparse_tools;
use crate::model::{HyperConfig, ModelKind};
use crate::predictive::{
    compare_models, default_grid, evaluate_holdout, predict_band, BandConfig, Comparison, HoldoutReport,
    PredictiveBand,
};
use crate::sampler::{fit, PosteriorSamples, SamplerConfig};

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub sparse: Vec<String>,
    pub n_visible: usize,
    pub hyper: HyperConfig,
    pub sampler: SamplerConfig,
    pub bands: BandConfig,
}

impl ExperimentConfig {
    /// The last two tools are sparse with five visible points each.
    pub fn for_dataset(data: &GroupedDataset) -> Self {
        let labels = data.labels();
        let sparse = labels[labels.len().saturating_sub(2)..].to_vec();
        ExperimentConfig {
            sparse,
            n_visible: 5,
            hyper: HyperConfig::default(),
            sampler: SamplerConfig::default(),
            bands: BandConfig::default(),
        }
    }
}

/// One fitted model with everything derived from it.
#[derive(Debug, Clone)]
pub struct ModelRun {
    pub kind: ModelKind,
    pub samples: PosteriorSamples,
    pub summaries: Vec<ParameterSummary>,
    pub bands: Vec<PredictiveBand>,
    pub report: HoldoutReport,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub train: GroupedDataset,
    pub holdout: GroupedDataset,
    pub independent: ModelRun,
    pub hierarchical: ModelRun,
    pub comparison: Comparison,
}

/// Bands for every tool on [`default_grid`]s taken from `grid_source`.
pub fn bands_for_all(
    samples: &PosteriorSamples,
    grid_source: &GroupedDataset,
    cfg: &BandConfig,
) -> Result<Vec<PredictiveBand>> {
    grid_source
        .labels()
        .iter()
        .map(|tool| predict_band(samples, tool, &default_grid(grid_source, tool)?, cfg))
        .collect()
}

/// Fits `kind` on `train`, with band grids spanning each tool in `full`.
pub fn run_model(
    kind: ModelKind,
    train: &GroupedDataset,
    holdout: &GroupedDataset,
    full: &GroupedDataset,
    cfg: &ExperimentConfig,
) -> Result<ModelRun> {
    let samples = fit(kind, train, &cfg.hyper, &cfg.sampler)?;
    let summaries = summarize(&samples);
    let bands = bands_for_all(&samples, full, &cfg.bands)?;
    let report = evaluate_holdout(&samples, &bands, holdout)?;
    Ok(ModelRun {
        kind,
        samples,
        summaries,
        bands,
        report,
    })
}

pub fn run_experiment(data: &GroupedDataset, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let (train, holdout) = split_sparse_tools(data, &cfg.sparse, cfg.n_visible)?;
    let independent = run_model(ModelKind::Independent, &train, &holdout, data, cfg)?;
    let hierarchical = run_model(ModelKind::Hierarchical, &train, &holdout, data, cfg)?;
    let comparison = compare_models(&independent.report, &hierarchical.report)?;
    Ok(ExperimentResult {
        train,
        holdout,
        independent,
        hierarchical,
        comparison,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{generate_fleet, GeneratorConfig};

    #[test]
    fn small_run_has_one_row_per_tool() {
        let (d, _) = generate_fleet(&GeneratorConfig::default()).unwrap();
        let mut cfg = ExperimentConfig::for_dataset(&d);
        assert_eq!(cfg.sparse, vec!["6".to_string(), "7".to_string()]);
        cfg.sampler = SamplerConfig {
            n_chains: 2,
            n_warmup: 150,
            n_samples: 100,
            ..SamplerConfig::default()
        };
        let r = run_experiment(&d, &cfg).unwrap();
        assert_eq!(r.comparison.rows.len(), 7);
        assert_eq!(r.holdout.n_obs(), 30);
        assert!(r.comparison.rows.iter().filter(|row| row.sparse).count() == 2);
        assert_eq!(r.hierarchical.bands.len(), 7);
    }
}
