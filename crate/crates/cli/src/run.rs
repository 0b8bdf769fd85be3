use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use pooled_wear::diagnostics::{max_rhat, summarize, ParameterSummary};
use pooled_wear::experiment::{run_experiment, ExperimentConfig};
use pooled_wear::io::{
    generate_fleet, read_dataset, write_bands_csv, write_comparison_csv, write_dataset_csv,
    write_draws_csv, write_report_csv, write_summary_csv, write_truth_csv,
};
use pooled_wear::predictive::BandConfig;
use pooled_wear::{fit, GroupedDataset, HyperConfig, ModelKind, PosteriorSamples, SamplerConfig};

use crate::args::{DataArgs, ExperimentArgs, FitArgs, GenerateArgs};
use crate::manifest::{blob_hash, DataSource, ExperimentSettings, Manifest};

/// R-hat above which a completed run exits with [`EXIT_UNCONVERGED`].
pub const RHAT_LIMIT: f64 = 1.05;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_UNCONVERGED: i32 = 3;
pub const EXIT_INIT: i32 = 4;
pub const THREADS_ENV: &str = "POOLED_WEAR_THREADS";

#[derive(Debug)]
pub enum CliError {
    Core(pooled_wear::Error),
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(pooled_wear::Error::Init(_)) => EXIT_INIT,
            _ => EXIT_USAGE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => e.fmt(f),
            CliError::Usage(m) => f.write_str(m),
        }
    }
}

impl From<pooled_wear::Error> for CliError {
    fn from(e: pooled_wear::Error) -> Self {
        CliError::Core(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

/// Collects output files under one run directory and records their hashes.
struct OutDir {
    root: PathBuf,
    hashes: BTreeMap<String, String>,
}

impl OutDir {
    fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            hashes: BTreeMap::new(),
        })
    }

    fn write<F>(&mut self, rel: &str, render: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> pooled_wear::Result<()>,
    {
        let mut buf = Vec::new();
        render(&mut buf)?;
        self.put(rel, buf)
    }

    fn put(&mut self, rel: &str, bytes: Vec<u8>) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        self.hashes.insert(rel.to_string(), blob_hash(&bytes));
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))
    }

    fn finish(mut self, mut manifest: Manifest) -> Result<()> {
        manifest.outputs = std::mem::take(&mut self.hashes);
        let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        json.push(b'\n');
        let path = self.root.join("manifest.json");
        fs::write(&path, json).map_err(|e| io_err(&path, e))
    }
}

fn thread_cap(n_chains: usize) -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n.min(n_chains)),
            _ => Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get()).min(n_chains)),
    }
}

fn read_manifest(path: &Path, command: &str) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let m: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: invalid manifest: {e}", path.display())))?;
    if m.command != command {
        return Err(CliError::Usage(format!(
            "{}: manifest records a `{}` run, not `{command}`",
            path.display(),
            m.command
        )));
    }
    Ok(m)
}

struct LoadedData {
    data: GroupedDataset,
    bytes: Vec<u8>,
    generated: Option<pooled_wear::io::FleetTruth>,
}

fn data_source(args: &DataArgs, seed: u64) -> Result<DataSource> {
    match (&args.input, args.generate) {
        (Some(path), false) => Ok(DataSource::File { path: path.clone() }),
        (None, true) => Ok(DataSource::Generated {
            generator: args.fleet.config(seed),
        }),
        _ => Err(CliError::Usage("give exactly one of --input or --generate".into())),
    }
}

fn load(source: &DataSource) -> Result<LoadedData> {
    match source {
        DataSource::File { path } => {
            let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
            let data = read_dataset(bytes.as_slice(), &path.display().to_string())?;
            Ok(LoadedData {
                data,
                bytes,
                generated: None,
            })
        }
        DataSource::Generated { generator } => {
            let (data, truth) = generate_fleet(generator)?;
            let mut bytes = Vec::new();
            write_dataset_csv(&data, &mut bytes)?;
            Ok(LoadedData {
                data,
                bytes,
                generated: Some(truth),
            })
        }
    }
}

/// Data as recorded in a manifest, refusing files whose content changed.
fn load_checked(m: &Manifest) -> Result<LoadedData> {
    let loaded = load(&m.data)?;
    let hash = blob_hash(&loaded.bytes);
    if hash != m.data_hash {
        return Err(CliError::Usage(format!(
            "input content hash {hash} does not match the manifest ({})",
            m.data_hash
        )));
    }
    Ok(loaded)
}

fn write_generated(out: &mut OutDir, loaded: &LoadedData) -> Result<()> {
    if let Some(truth) = &loaded.generated {
        out.put("fleet.csv", loaded.bytes.clone())?;
        out.write("truth.csv", |w| write_truth_csv(truth, w))?;
    }
    Ok(())
}

fn write_fit(out: &mut OutDir, prefix: &str, samples: &PosteriorSamples, summary: &[ParameterSummary]) -> Result<()> {
    out.write(&format!("{prefix}draws.csv"), |w| write_draws_csv(samples, w))?;
    out.write(&format!("{prefix}summary.csv"), |w| write_summary_csv(summary, w))
}

/// Prints a one-line convergence report and returns whether it passed.
fn report_convergence(kind: ModelKind, samples: &PosteriorSamples, summary: &[ParameterSummary]) -> bool {
    let rhat = max_rhat(summary);
    let ess = summary
        .iter()
        .filter_map(|p| p.ess_bulk.map(|d| d.value))
        .fold(f64::INFINITY, f64::min);
    println!(
        "{kind}: max R-hat {rhat:.4}, min bulk ESS {ess:.0}, divergent transitions {}",
        samples.total_divergent()
    );
    if samples.divergence_flagged() {
        eprintln!("warning: {kind}: a chain diverged on more than 20% of its draws");
    }
    let ok = rhat <= RHAT_LIMIT;
    if !ok {
        eprintln!("warning: {kind}: R-hat {rhat:.4} exceeds {RHAT_LIMIT}; draws were written but have not converged");
    }
    ok
}

fn finish_code(converged: bool) -> i32 {
    if converged {
        0
    } else {
        EXIT_UNCONVERGED
    }
}

pub fn cmd_fit(args: &FitArgs) -> Result<i32> {
    let (manifest, loaded) = match &args.manifest {
        Some(path) => {
            let m = read_manifest(path, "fit")?;
            let loaded = load_checked(&m)?;
            (m, loaded)
        }
        None => {
            let source = data_source(&args.data, args.sampler.seed)?;
            let loaded = load(&source)?;
            let m = Manifest {
                program: "pooled-wear".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: "fit".into(),
                data: source,
                data_hash: blob_hash(&loaded.bytes),
                models: args.model.kinds(),
                sampler: args.sampler.config(),
                hyper: HyperConfig::default(),
                experiment: None,
                outputs: BTreeMap::new(),
            };
            (m, loaded)
        }
    };
    let sampler = SamplerConfig {
        max_threads: thread_cap(manifest.sampler.n_chains)?,
        ..manifest.sampler
    };
    manifest.hyper.validate()?;
    sampler.validate()?;

    let mut out = OutDir::create(&args.out)?;
    write_generated(&mut out, &loaded)?;
    let nested = manifest.models.len() > 1;
    let mut converged = true;
    for &kind in &manifest.models {
        let samples = fit(kind, &loaded.data, &manifest.hyper, &sampler)?;
        let summary = summarize(&samples);
        converged &= report_convergence(kind, &samples, &summary);
        let prefix = if nested { format!("{kind}/") } else { String::new() };
        write_fit(&mut out, &prefix, &samples, &summary)?;
    }
    out.finish(manifest)?;
    Ok(finish_code(converged))
}

pub fn cmd_experiment(args: &ExperimentArgs) -> Result<i32> {
    let (manifest, loaded) = match &args.manifest {
        Some(path) => {
            let m = read_manifest(path, "experiment")?;
            if m.experiment.is_none() {
                return Err(CliError::Usage(format!("{}: manifest lacks experiment settings", path.display())));
            }
            let loaded = load_checked(&m)?;
            (m, loaded)
        }
        None => {
            let source = data_source(&args.data, args.sampler.seed)?;
            let loaded = load(&source)?;
            let defaults = ExperimentConfig::for_dataset(&loaded.data);
            let sparse = if args.sparse_tools.is_empty() { defaults.sparse } else { args.sparse_tools.clone() };
            let m = Manifest {
                program: "pooled-wear".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: "experiment".into(),
                data: source,
                data_hash: blob_hash(&loaded.bytes),
                models: vec![ModelKind::Independent, ModelKind::Hierarchical],
                sampler: args.sampler.config(),
                hyper: HyperConfig::default(),
                experiment: Some(ExperimentSettings {
                    sparse_tools: sparse,
                    n_visible: args.n_visible,
                    levels: args.levels.clone(),
                    band_seed: args.sampler.seed,
                    draws_per_sample: BandConfig::default().draws_per_sample,
                    band_note: crate::manifest::BAND_NOTE.to_string(),
                }),
                outputs: BTreeMap::new(),
            };
            (m, loaded)
        }
    };
    let settings = manifest.experiment.clone().expect("experiment settings");
    let bands = BandConfig {
        levels: settings.levels.clone(),
        draws_per_sample: settings.draws_per_sample,
        seed: settings.band_seed,
    };
    bands.validate()?;
    for needed in [0.025, 0.975] {
        if !bands.levels.iter().any(|&l| (l - needed).abs() < 1e-12) {
            return Err(CliError::Usage(format!("--levels must include {needed} for the 95% band metrics")));
        }
    }
    let cfg = ExperimentConfig {
        sparse: settings.sparse_tools.clone(),
        n_visible: settings.n_visible,
        hyper: manifest.hyper,
        sampler: SamplerConfig {
            max_threads: thread_cap(manifest.sampler.n_chains)?,
            ..manifest.sampler
        },
        bands,
    };
    cfg.hyper.validate()?;
    cfg.sampler.validate()?;

    let result = run_experiment(&loaded.data, &cfg)?;
    let mut out = OutDir::create(&args.out)?;
    write_generated(&mut out, &loaded)?;
    out.write("train.csv", |w| write_dataset_csv(&result.train, w))?;
    out.write("holdout.csv", |w| write_dataset_csv(&result.holdout, w))?;
    let mut converged = true;
    for run in [&result.independent, &result.hierarchical] {
        converged &= report_convergence(run.kind, &run.samples, &run.summaries);
        let prefix = format!("{}/", run.kind);
        write_fit(&mut out, &prefix, &run.samples, &run.summaries)?;
        out.write(&format!("{prefix}bands.csv"), |w| write_bands_csv(&run.bands, false, w))?;
        out.write(&format!("{prefix}location_bands.csv"), |w| write_bands_csv(&run.bands, true, w))?;
        out.write(&format!("{prefix}report.csv"), |w| write_report_csv(&run.report, w))?;
    }
    out.write("compare.csv", |w| write_comparison_csv(&result.comparison, w))?;
    for row in result.comparison.rows.iter().filter(|r| r.sparse) {
        println!(
            "sparse tool {}: 95% band width ratio {:.3}, NLPD independent {} / hierarchical {}",
            row.tool,
            row.width_ratio(),
            fmt_metric(row.independent.nlpd),
            fmt_metric(row.hierarchical.nlpd)
        );
    }
    out.finish(manifest)?;
    Ok(finish_code(converged))
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.3}"))
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<i32> {
    let cfg = args.fleet.config(args.seed);
    let (data, truth) = generate_fleet(&cfg)?;
    let mut out = OutDir::create(&args.out)?;
    out.write("fleet.csv", |w| write_dataset_csv(&data, w))?;
    out.write("truth.csv", |w| write_truth_csv(&truth, w))?;
    println!("{} tools, {} observations", data.n_groups(), data.n_obs());
    Ok(0)
}
