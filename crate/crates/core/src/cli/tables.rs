use std::fmt::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;

use crate::data::load_sample;
use crate::metrics::{export_visualization, Distribution, ResultsFile};

fn number(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.2}")
    }
}

fn distribution_row(out: &mut String, name: &str, d: &Option<Distribution>) {
    match d {
        Some(d) => writeln!(
            out,
            "{name:<14}{:>10}{:>10}{:>10}{:>10}{:>10}{:>10}",
            number(d.min),
            number(d.q1),
            number(d.median),
            number(d.mean),
            number(d.q3),
            number(d.max)
        ),
        None => writeln!(out, "{name:<14}{:>10}", "-"),
    }
    .expect("write to string");
}

/// Plain-text tables for a results file.
pub fn render(results: &ResultsFile) -> String {
    let r = &results.report;
    let mut out = String::new();
    let w = &mut out;
    writeln!(w, "oracles: {}", results.oracles.join(" ")).unwrap();
    writeln!(w, "runs: {}  successes: {}  success rate: {:.2}%", r.total_runs, r.successes, 100.0 * r.success_rate)
        .unwrap();
    let failed = results.runs.iter().filter(|x| x.error.is_some()).count();
    if failed > 0 {
        writeln!(w, "runs with oracle failures: {failed}").unwrap();
    }

    writeln!(w, "\nidentified microarchitectures (% of runs)").unwrap();
    for (ma, share) in &r.per_ma {
        writeln!(w, "  MA {ma:<4}{:>8.2}", 100.0 * share).unwrap();
    }

    writeln!(w, "\n{:<14}{:>10}{:>10}{:>10}{:>10}{:>10}{:>10}", "", "min", "q1", "median", "mean", "q3", "max").unwrap();
    distribution_row(w, "psnr (dB)", &r.psnr_db);
    distribution_row(w, "local steps", &r.local_steps);
    distribution_row(w, "remote steps", &r.remote_steps);

    writeln!(w, "\nidentifying label -> contrast label").unwrap();
    if r.confusion.is_empty() {
        writeln!(w, "  (none)").unwrap();
    }
    for c in &r.confusion {
        writeln!(w, "  {:>3} -> {:<3}{:>6}", c.identifying, c.contrast, c.count).unwrap();
    }
    out
}

/// Export original/amplified PGM pairs for every successful run with stored
/// samples. Returns the files written.
pub fn visualize(results: &ResultsFile, results_dir: &Path, out: &Path, amplification: f32) -> anyhow::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut written = Vec::new();
    for run in results.runs.iter().filter(|r| r.summary.success) {
        let (Some(sample), Some(original)) = (&run.sample_file, &run.original_file) else {
            continue;
        };
        let boundary = load_sample(results_dir.join(sample)).with_context(|| format!("reading {sample}"))?;
        let original = load_sample(results_dir.join(original)).with_context(|| format!("reading {original}"))?;
        let (a, b) = export_visualization(&original, &boundary, amplification, out.join(format!("run_{:06}", run.seed)))?;
        written.push(a);
        written.push(b);
    }
    Ok(written)
}
