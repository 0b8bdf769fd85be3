//! Dataset ingestion, synthetic fleets, holdout splitting and the CSV
//! output formats.
//!
//! All files are UTF-8 with LF line endings. Floats are written in
//! scientific notation with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64` exactly; absent values are empty cells.

mod formats;
mod generate;
mod split;

pub use formats::{
    level_column, load_csv, read_dataset, write_bands_csv, write_comparison_csv, write_dataset_csv,
    write_draws_csv, write_report_csv, write_summary_csv, write_truth_csv, DATASET_HEADER,
};
pub use generate::{generate_fleet, FleetTruth, GeneratorConfig, NoiseFamily};
pub use split::split_sparse_tools;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}
