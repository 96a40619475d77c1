use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::search::RunSummary;

use super::float_text;

/// Min, quartiles, mean and max of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    #[serde(with = "float_text")]
    pub min: f64,
    #[serde(with = "float_text")]
    pub q1: f64,
    #[serde(with = "float_text")]
    pub median: f64,
    #[serde(with = "float_text")]
    pub mean: f64,
    #[serde(with = "float_text")]
    pub q3: f64,
    #[serde(with = "float_text")]
    pub max: f64,
}

impl Distribution {
    /// `None` for an empty sample. Quartiles interpolate linearly between order statistics.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        Some(Self {
            min: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            mean,
            q3: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
        })
    }
}

/// Linear interpolation between closest ranks (`h = (n - 1) p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 || lo + 1 >= sorted.len() {
        return sorted[lo];
    }
    let (a, b) = (sorted[lo], sorted[lo + 1]);
    if a == b {
        return a;
    }
    a + frac * (b - a)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCell {
    pub identifying: usize,
    pub contrast: usize,
    pub count: usize,
}

/// Aggregate statistics over a set of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub total_runs: usize,
    pub successes: usize,
    #[serde(with = "float_text")]
    pub success_rate: f64,
    /// Share of all runs that identified each MA; sums to `success_rate`.
    pub per_ma: BTreeMap<u32, f64>,
    /// Over successful runs.
    pub psnr_db: Option<Distribution>,
    pub local_steps: Option<Distribution>,
    pub remote_steps: Option<Distribution>,
    /// Keyed by (identifying label, contrast label), successful runs only.
    pub confusion: Vec<ConfusionCell>,
}

impl ExperimentReport {
    pub fn confusion_total(&self) -> usize {
        self.confusion.iter().map(|c| c.count).sum()
    }
}

/// Fold run summaries into an [`ExperimentReport`]. MAs `0..num_mas` always
/// appear in `per_ma`, even when never identified.
pub fn aggregate<T: AsRef<RunSummary>>(results: &[T], num_mas: u32) -> ExperimentReport {
    let total = results.len();
    let successes: Vec<&RunSummary> = results.iter().map(AsRef::as_ref).filter(|r| r.success).collect();
    let mut per_ma_counts: BTreeMap<u32, usize> = (0..num_mas).map(|m| (m, 0)).collect();
    let mut confusion: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for r in &successes {
        if let Some(ma) = r.identified_ma {
            *per_ma_counts.entry(ma).or_default() += 1;
        }
        if let (Some(i), Some(c)) = (r.identifying_label, r.contrast_label) {
            *confusion.entry((i, c)).or_default() += 1;
        }
    }
    let share = |n: usize| if total == 0 { 0.0 } else { n as f64 / total as f64 };
    let collect = |f: &dyn Fn(&RunSummary) -> f64| successes.iter().map(|r| f(r)).collect::<Vec<_>>();
    ExperimentReport {
        total_runs: total,
        successes: successes.len(),
        success_rate: share(successes.len()),
        per_ma: per_ma_counts.into_iter().map(|(m, n)| (m, share(n))).collect(),
        psnr_db: Distribution::of(&collect(&|r| r.psnr_db)),
        local_steps: Distribution::of(&collect(&|r| r.local_steps as f64)),
        remote_steps: Distribution::of(&collect(&|r| r.remote_steps as f64)),
        confusion: confusion
            .into_iter()
            .map(|((identifying, contrast), count)| ConfusionCell {
                identifying,
                contrast,
                count,
            })
            .collect(),
    }
}

impl AsRef<RunSummary> for RunSummary {
    fn as_ref(&self) -> &RunSummary {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(success: bool, ma: Option<u32>, psnr: f64) -> RunSummary {
        RunSummary {
            success,
            identified_ma: ma,
            identifying_label: ma.map(|m| m as usize),
            contrast_label: ma.map(|_| 9),
            local_steps: 10,
            remote_steps: 3,
            psnr_db: psnr,
        }
    }

    #[test]
    fn empty_report() {
        let r = aggregate::<RunSummary>(&[], 4);
        assert_eq!(r.total_runs, 0);
        assert_eq!(r.success_rate, 0.0);
        assert!(r.confusion.is_empty());
        assert!(r.psnr_db.is_none());
        assert_eq!(r.per_ma.values().sum::<f64>(), 0.0);
    }

    #[test]
    fn counting_example() {
        let runs = [
            run(true, Some(0), 50.0),
            run(false, None, 60.0),
            run(true, Some(2), 70.0),
            run(false, None, 80.0),
        ];
        let r = aggregate(&runs, 4);
        assert_eq!(r.success_rate, 0.5);
        let shares: Vec<f64> = r.per_ma.values().copied().collect();
        assert_eq!(shares, vec![0.25, 0.0, 0.25, 0.0]);
        assert_eq!(r.confusion_total(), 2);
        assert_eq!(r.psnr_db.unwrap().median, 60.0);
    }

    #[test]
    fn psnr_quartiles() {
        let d = Distribution::of(&[60.0, 40.0, 50.0]).unwrap();
        assert_eq!((d.min, d.q1, d.median, d.mean, d.q3, d.max), (40.0, 45.0, 50.0, 50.0, 55.0, 60.0));
        let d = Distribution::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((d.q1, d.median, d.q3), (1.75, 2.5, 3.25));
    }

    #[test]
    fn infinite_values_do_not_poison_quartiles() {
        let d = Distribution::of(&[40.0, f64::INFINITY, f64::INFINITY]).unwrap();
        assert_eq!(d.median, f64::INFINITY);
        assert_eq!(d.min, 40.0);
        assert!(d.q1.is_infinite());
        let d = Distribution::of(&[40.0, 50.0, f64::INFINITY]).unwrap();
        assert_eq!(d.median, 50.0);
    }
}
