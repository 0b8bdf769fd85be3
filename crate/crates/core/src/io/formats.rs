use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::data::{GroupedDataset, RawRecord};
use crate::diagnostics::ParameterSummary;
use crate::error::{Error, Result};
use crate::io::{fmt_f64, fmt_opt, FleetTruth};
use crate::predictive::{Comparison, ComparisonRow, HoldoutReport, PredictiveBand, ToolMetrics};
use crate::sampler::PosteriorSamples;

pub const DATASET_HEADER: [&str; 3] = ["tool_id", "sliding_distance", "roughness_ra"];

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

/// Reads the `tool_id,sliding_distance,roughness_ra` format from disk.
pub fn load_csv(path: impl AsRef<Path>) -> Result<GroupedDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, &path.display().to_string())
}

/// Parses a dataset CSV; `source` names the input in error messages.
pub fn read_dataset<R: Read>(input: R, source: &str) -> Result<GroupedDataset> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(input);
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.is_empty() {
        return Err(parse_err(1, "empty file".into()));
    }
    if headers.iter().collect::<Vec<_>>() != DATASET_HEADER {
        return Err(parse_err(
            1,
            format!(
                "header must be exactly `{}`, got `{}`",
                DATASET_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.iter().collect::<Vec<_>>() == DATASET_HEADER {
            return Err(parse_err(line, "duplicate header row".into()));
        }
        let num = |i: usize, name: &str| -> Result<f64> {
            let field = row.get(i).unwrap_or("");
            field
                .trim()
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("{name} `{field}` is not a number")))
        };
        let record = RawRecord {
            tool_id: row.get(0).unwrap_or("").to_string(),
            sliding_distance: num(1, "sliding_distance")?,
            roughness_ra: num(2, "roughness_ra")?,
        };
        if record.tool_id.is_empty() {
            return Err(parse_err(line, "empty tool_id".into()));
        }
        if !(record.sliding_distance.is_finite() && record.sliding_distance >= 0.0) {
            return Err(parse_err(line, "sliding_distance must be finite and non-negative".into()));
        }
        if !(record.roughness_ra.is_finite() && record.roughness_ra >= 0.0) {
            return Err(parse_err(line, "roughness_ra must be finite and non-negative".into()));
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }
    GroupedDataset::from_records(&records)
}

/// Writes raw-unit records, group by group.
pub fn write_dataset_csv<W: Write>(data: &GroupedDataset, out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(DATASET_HEADER)?;
    for r in data.to_records() {
        w.write_record([r.tool_id, fmt_f64(r.sliding_distance), fmt_f64(r.roughness_ra)])?;
    }
    w.flush().map_err(|e| Error::io("<dataset>", e))?;
    Ok(())
}

/// `chain,iteration,<param names>`; iterations are 0-based post-warmup.
pub fn write_draws_csv<W: Write>(samples: &PosteriorSamples, out: W) -> Result<()> {
    let mut w = writer(out);
    let mut header = vec!["chain".to_string(), "iteration".to_string()];
    header.extend(samples.names.iter().cloned());
    w.write_record(&header)?;
    for (c, chain) in samples.draws.iter().enumerate() {
        for (i, draw) in chain.iter().enumerate() {
            let mut row = vec![c.to_string(), i.to_string()];
            row.extend(draw.iter().map(|&v| fmt_f64(v)));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io("<draws>", e))?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(summaries: &[ParameterSummary], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record([
        "parameter", "mean", "sd", "median", "q025", "q25", "q75", "q975", "mcse_mean", "rhat", "ess_bulk",
    ])?;
    for s in summaries {
        w.write_record([
            s.name.clone(),
            fmt_f64(s.mean),
            fmt_f64(s.sd),
            fmt_f64(s.median),
            fmt_f64(s.q025),
            fmt_f64(s.q25),
            fmt_f64(s.q75),
            fmt_f64(s.q975),
            fmt_f64(s.mcse_mean),
            fmt_opt(s.rhat.map(|d| d.value)),
            fmt_opt(s.ess_bulk.map(|d| d.value)),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<summary>", e))?;
    Ok(())
}

/// Column name of a quantile level: `q` followed by the decimal digits of
/// the level, so 0.025 → `q025`, 0.25 → `q25`, 0.975 → `q975`.
pub fn level_column(level: f64) -> String {
    let s = format!("{level}");
    let digits = s.split_once('.').map_or("", |(_, frac)| frac);
    format!("q{digits}")
}

/// Plot data `tool_id,x,center,q025,q25,q75,q975` (one column per level).
/// `location_only` selects the location band instead of the predictive one.
pub fn write_bands_csv<W: Write>(bands: &[PredictiveBand], location_only: bool, out: W) -> Result<()> {
    let mut w = writer(out);
    let levels = bands.first().map(|b| b.levels.clone()).unwrap_or_default();
    let mut header = vec!["tool_id".to_string(), "x".to_string(), "center".to_string()];
    header.extend(levels.iter().map(|&l| level_column(l)));
    w.write_record(&header)?;
    for b in bands {
        if b.levels != levels {
            return Err(Error::Structure("bands use different quantile levels".into()));
        }
        let curves = if location_only { &b.location } else { &b.predictive };
        for (i, &x) in b.x.iter().enumerate() {
            let mut row = vec![b.tool.clone(), fmt_f64(x), fmt_f64(b.center[i])];
            row.extend(curves.iter().map(|q| fmt_f64(q[i])));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io("<bands>", e))?;
    Ok(())
}

fn metric_cells(m: &ToolMetrics) -> [String; 7] {
    [
        m.tool.clone(),
        m.n_train.to_string(),
        m.n_holdout.to_string(),
        fmt_opt(m.mae),
        fmt_opt(m.coverage95),
        fmt_f64(m.mean_width95),
        fmt_opt(m.nlpd),
    ]
}

/// Per-tool rows then an `all` row.
pub fn write_report_csv<W: Write>(report: &HoldoutReport, out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["tool_id", "n_train", "n_holdout", "mae", "coverage95", "mean_width95", "nlpd"])?;
    for t in report.tools.iter().chain(std::iter::once(&report.aggregate)) {
        w.write_record(metric_cells(t))?;
    }
    w.flush().map_err(|e| Error::io("<report>", e))?;
    Ok(())
}

/// One row per tool plus the aggregate; deltas are hierarchical minus
/// independent and `width_ratio` is hierarchical over independent.
pub fn write_comparison_csv<W: Write>(cmp: &Comparison, out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record([
        "tool_id", "sparse", "n_train", "n_holdout",
        "mae_independent", "mae_hierarchical", "mae_delta",
        "coverage95_independent", "coverage95_hierarchical", "coverage95_delta",
        "width95_independent", "width95_hierarchical", "width95_delta", "width_ratio",
        "nlpd_independent", "nlpd_hierarchical", "nlpd_delta",
    ])?;
    let cells = |r: &ComparisonRow| -> Vec<String> {
        vec![
            r.tool.clone(),
            r.sparse.to_string(),
            r.n_train.to_string(),
            r.n_holdout.to_string(),
            fmt_opt(r.independent.mae),
            fmt_opt(r.hierarchical.mae),
            fmt_opt(r.mae_delta()),
            fmt_opt(r.independent.coverage95),
            fmt_opt(r.hierarchical.coverage95),
            fmt_opt(r.coverage_delta()),
            fmt_f64(r.independent.mean_width95),
            fmt_f64(r.hierarchical.mean_width95),
            fmt_f64(r.width_delta()),
            fmt_f64(r.width_ratio()),
            fmt_opt(r.independent.nlpd),
            fmt_opt(r.hierarchical.nlpd),
            fmt_opt(r.nlpd_delta()),
        ]
    };
    for r in cmp.rows.iter().chain(std::iter::once(&cmp.aggregate)) {
        w.write_record(cells(r))?;
    }
    w.flush().map_err(|e| Error::io("<comparison>", e))?;
    Ok(())
}

/// Ground truth of a generated fleet: one row per tool (`m,c,gamma`), then a
/// `population` row with the hyperparameters. Slopes are per unit of scaled x.
pub fn write_truth_csv<W: Write>(truth: &FleetTruth, out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record([
        "tool_id", "m", "c", "gamma", "mu_m", "sigma_m", "mu_c", "sigma_c", "gamma_pop",
    ])?;
    for (label, g) in truth.labels.iter().zip(&truth.groups) {
        let mut row = vec![label.clone(), fmt_f64(g.m), fmt_f64(g.c), fmt_f64(g.gamma)];
        row.extend(std::iter::repeat_n(String::new(), 5));
        w.write_record(&row)?;
    }
    let h = &truth.hyper;
    let mut row = vec!["population".to_string(), String::new(), String::new(), String::new()];
    row.extend([h.mu_m, h.sigma_m, h.mu_c, h.sigma_c, h.gamma_pop].map(fmt_f64));
    w.write_record(&row)?;
    w.flush().map_err(|e| Error::io("<truth>", e))?;
    Ok(())
}
