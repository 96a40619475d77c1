use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::search::RunSummary;

use super::{float_text, ExperimentReport, MetricsError};

/// One forge run as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    #[serde(flatten)]
    pub summary: RunSummary,
    /// Boundary sample, relative to the results directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_file: Option<String>,
    /// Host sample, relative to the results directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_file: Option<String>,
    /// Set when the run failed to talk to an oracle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl AsRef<RunSummary> for RunRecord {
    fn as_ref(&self) -> &RunSummary {
        &self.summary
    }
}

/// Contents of `results.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub oracles: Vec<String>,
    pub num_mas: u32,
    pub runs: Vec<RunRecord>,
    pub report: ExperimentReport,
}

pub fn write_results_json(results: &ResultsFile, path: impl AsRef<Path>) -> Result<(), MetricsError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, results)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_results_json(path: impl AsRef<Path>) -> Result<ResultsFile, MetricsError> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per run; absent values are empty cells and infinities are `inf`.
pub fn write_results_csv(runs: &[RunRecord], path: impl AsRef<Path>) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "seed",
        "success",
        "identified_ma",
        "identifying_label",
        "contrast_label",
        "local_steps",
        "remote_steps",
        "psnr_db",
    ])?;
    for r in runs {
        let s = &r.summary;
        let psnr = float_text::to_text(s.psnr_db).map_or_else(|| s.psnr_db.to_string(), str::to_string);
        w.write_record([
            r.seed.to_string(),
            s.success.to_string(),
            opt(s.identified_ma),
            opt(s.identifying_label),
            opt(s.contrast_label),
            s.local_steps.to_string(),
            s.remote_steps.to_string(),
            psnr,
        ])?;
    }
    w.flush()?;
    Ok(())
}
