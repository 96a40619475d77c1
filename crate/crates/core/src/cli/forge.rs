use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context};
use rayon::prelude::*;

use crate::data::{load_sample, save_sample, shape_sample};
use crate::metrics::{aggregate, write_results_csv, write_results_json, ResultsFile, RunRecord};
use crate::model::{load_model, Model};
use crate::numerics::Tensor;
use crate::search::{generate, RunSummary, SearchError};

use super::spec::{distinct_mas, open_oracles, RunSpec, SampleSource};

pub struct ForgeOutcome {
    pub results: ResultsFile,
}

impl ForgeOutcome {
    pub fn successes(&self) -> usize {
        self.results.report.successes
    }
}

fn failed(seed: u64, error: String) -> RunRecord {
    RunRecord {
        seed,
        summary: RunSummary {
            success: false,
            identified_ma: None,
            identifying_label: None,
            contrast_label: None,
            local_steps: 0,
            remote_steps: 0,
            psnr_db: f64::INFINITY,
        },
        sample_file: None,
        original_file: None,
        error: Some(error),
    }
}

fn starts(source: &SampleSource) -> anyhow::Result<Vec<(u64, Tensor)>> {
    match source {
        SampleSource::Seeds { seed, count } => Ok((0..*count as u64)
            .map(|i| {
                let s = seed.wrapping_add(i);
                (s, shape_sample(s).input)
            })
            .collect()),
        SampleSource::Files(paths) => paths
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let t = load_sample(p).with_context(|| format!("reading sample {}", p.display()))?;
                Ok((i as u64, t))
            })
            .collect(),
    }
}

fn one_run(spec: &RunSpec, model: &Arc<Model>, seed: u64, x0: &Tensor) -> anyhow::Result<RunRecord> {
    let mut oracles = match open_oracles(&spec.oracles, model) {
        Ok(o) => o,
        Err(e) if e.is_transport() => return Ok(failed(seed, format!("oracle unreachable: {e}"))),
        Err(e) => return Err(e.into()),
    };
    let result = match generate(&mut oracles, spec.local, x0, &spec.config) {
        Ok(r) => r,
        Err(SearchError::Oracle(e)) if e.is_transport() => return Ok(failed(seed, format!("oracle failed: {e}"))),
        Err(e) => return Err(e.into()),
    };
    let mut record = RunRecord {
        seed,
        summary: RunSummary::from(&result),
        sample_file: None,
        original_file: None,
        error: None,
    };
    if result.success {
        let boundary = format!("run_{seed:06}.bsf");
        let original = format!("run_{seed:06}_original.bsf");
        save_sample(&result.sample, spec.out.join(&boundary))?;
        save_sample(x0, spec.out.join(&original))?;
        record.sample_file = Some(boundary);
        record.original_file = Some(original);
    }
    Ok(record)
}

/// Run one search per start and write `results.json`, `results.csv` and the
/// successful samples into `spec.out`.
pub fn forge(spec: &RunSpec) -> anyhow::Result<ForgeOutcome> {
    let mas = distinct_mas(&spec.oracles);
    if mas < 2 {
        bail!("need >= 2 MAs, got {mas}");
    }
    if spec.local >= spec.oracles.len() {
        bail!("--local {} out of range for {} oracles", spec.local, spec.oracles.len());
    }
    spec.config.validate()?;
    let model = Arc::new(
        load_model(&spec.model).with_context(|| format!("loading model {}", spec.model.display()))?,
    );
    let starts = starts(&spec.source)?;
    if let Some((_, x)) = starts.iter().find(|(_, x)| x.len() != model.input_len()) {
        bail!(
            "sample shape {:?} does not fit a model with {} inputs",
            x.shape(),
            model.input_len()
        );
    }
    fs::create_dir_all(&spec.out).with_context(|| format!("creating {}", spec.out.display()))?;
    if !starts.is_empty() {
        preflight(spec, &model)?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .context("starting worker pool")?;
    let runs = pool.install(|| {
        starts
            .par_iter()
            .map(|(seed, x0)| one_run(spec, &model, *seed, x0))
            .collect::<anyhow::Result<Vec<_>>>()
    })?;

    let results = ResultsFile {
        oracles: spec.oracles.iter().map(ToString::to_string).collect(),
        num_mas: ma_range(spec),
        report: aggregate(&runs, ma_range(spec)),
        runs,
    };
    write_results_json(&results, spec.out.join("results.json"))?;
    write_results_csv(&results.runs, spec.out.join("results.csv"))?;
    Ok(ForgeOutcome { results })
}

/// Report MA ids `0..=max`, so shares line up with the configured ids.
fn ma_range(spec: &RunSpec) -> u32 {
    spec.oracles.iter().map(|s| s.ma_id + 1).max().unwrap_or(0)
}

/// Abort when no oracle answers at all; single unreachable oracles only fail runs.
fn preflight(spec: &RunSpec, model: &Arc<Model>) -> anyhow::Result<()> {
    let mut errors = Vec::new();
    for (i, s) in spec.oracles.iter().enumerate() {
        match open_oracles(std::slice::from_ref(s), model) {
            Ok(_) => return Ok(()),
            Err(e) => errors.push(format!("oracle {i} ({s}): {e}")),
        }
    }
    bail!("no oracle reachable:\n  {}", errors.join("\n  "))
}

pub fn results_dir(results_json: &Path) -> &Path {
    results_json.parent().unwrap_or(Path::new("."))
}
