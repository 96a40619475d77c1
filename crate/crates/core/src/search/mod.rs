//! Boundary-sample search.
//!
//! A search runs in two phases. The local phase walks a host sample toward the
//! nearest decision boundary of the cheap local oracle with a sign-corrected,
//! gap-scaled FGSM step. The remote phase then queries every oracle each round,
//! partitions the answers by label and steers toward the boundary whose
//! crossing leaves exactly one microarchitecture with a label of its own.

mod config;
mod select;
mod step;

pub use config::SearchConfig;
pub use select::{select_target, Decision};
pub use step::{correctness_sign, fgsm_step, reference_margin_gradient, CorrectnessSign};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{psnr, MetricsError};
use crate::model::Prediction;
use crate::numerics::{NumericsError, Tensor};
use crate::oracle::{BoxedOracle, Oracle, OracleError, OracleResult, QueryCounts, QueryLedger};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("need >= 2 MAs, oracle set covers {0}")]
    NeedTwoMas(usize),
    #[error("local oracle index {index} out of range for {count} oracles")]
    BadLocalIndex { index: usize, count: usize },
    #[error("no oracle results to select from")]
    EmptyResults,
    #[error("oracle {0} returned no gradient")]
    MissingGradient(usize),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Working step magnitude: the fresh gap after any change, grown while stalled.
#[derive(Debug, Clone, Copy)]
struct StallSchedule {
    scale: f32,
    floor: f32,
    value: f32,
}

impl StallSchedule {
    fn new(scale: f32, floor: f32) -> Self {
        Self { scale, floor, value: 0.0 }
    }

    fn update(&mut self, stalled: bool, fresh: f32) -> f32 {
        self.value = if stalled {
            (self.value * self.scale).min(f32::MAX)
        } else {
            fresh
        };
        if self.value == 0.0 {
            self.value = self.floor;
        }
        self.value
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalOutcome {
    pub sample: Tensor,
    pub steps: usize,
    pub reached: bool,
    pub prediction: Prediction,
    /// Working gap used for each applied step, in order.
    pub step_magnitudes: Vec<f32>,
}

/// Walk `x0` toward the nearest boundary of `oracle`.
///
/// `true_label` is the reference for the correctness sign. Stops as soon as
/// the gap falls below `cfg.target_dconf` or after `cfg.local_max` steps.
pub fn local_phase(
    oracle: &mut dyn Oracle,
    x0: &Tensor,
    true_label: usize,
    cfg: &SearchConfig,
) -> Result<LocalOutcome, SearchError> {
    cfg.validate()?;
    let mut x = x0.clone();
    let mut previous: Option<Prediction> = None;
    let mut schedule = StallSchedule::new(cfg.stall_scale, cfg.target_dconf);
    let mut magnitudes = Vec::new();
    let mut steps = 0;
    loop {
        let prediction = oracle.predict(&x)?.prediction;
        if prediction.dconf < cfg.target_dconf {
            return Ok(LocalOutcome {
                sample: x,
                steps,
                reached: true,
                prediction,
                step_magnitudes: magnitudes,
            });
        }
        if steps == cfg.local_max {
            return Ok(LocalOutcome {
                sample: x,
                steps,
                reached: false,
                prediction,
                step_magnitudes: magnitudes,
            });
        }
        let stalled = previous.as_ref().is_some_and(|p| p.same_as(&prediction));
        let d = schedule.update(stalled, prediction.dconf);
        let grad = oracle
            .gradient(&x)?
            .gradient
            .ok_or(SearchError::MissingGradient(oracle.id().index))?;
        let c = correctness_sign(&prediction, true_label);
        let g = reference_margin_gradient(&grad, &prediction, true_label);
        x = fgsm_step(&x, c, d, cfg.alpha, &g, cfg.clamp_range)?;
        magnitudes.push(d);
        previous = Some(prediction);
        steps += 1;
    }
}

/// Outcome of one search.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryResult {
    pub sample: Tensor,
    pub success: bool,
    pub identified_ma: Option<u32>,
    pub identifying_label: Option<usize>,
    pub contrast_label: Option<usize>,
    pub local_steps: usize,
    pub remote_steps: usize,
    /// Whether the local phase got below the target gap.
    pub local_reached: bool,
    /// Against the host sample; `+inf` when unchanged.
    pub psnr_db: f64,
    pub queries: QueryCounts,
}

fn ma_count(oracles: &[BoxedOracle]) -> usize {
    oracles.iter().map(|o| o.id().ma_id).collect::<BTreeSet<_>>().len()
}

fn query_all(oracles: &mut [BoxedOracle], x: &Tensor, with_gradient: bool) -> Result<Vec<OracleResult>, SearchError> {
    oracles
        .iter_mut()
        .map(|o| {
            if with_gradient {
                o.gradient(x)
            } else {
                o.predict(x)
            }
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(SearchError::from)
}

fn found(results: &[OracleResult], ma_id: u32, label: usize) -> (u32, usize, Option<usize>) {
    let others: Vec<OracleResult> = results.iter().filter(|r| r.oracle.ma_id != ma_id).cloned().collect();
    (ma_id, label, select::majority_label(&others, None))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteOutcome {
    pub sample: Tensor,
    pub success: bool,
    pub identified_ma: Option<u32>,
    pub identifying_label: Option<usize>,
    pub contrast_label: Option<usize>,
    pub steps: usize,
}

/// Refine `x` against every oracle until one microarchitecture is singled out.
pub fn remote_phase(oracles: &mut [BoxedOracle], x: &Tensor, cfg: &SearchConfig) -> Result<RemoteOutcome, SearchError> {
    cfg.validate()?;
    let mas = ma_count(oracles);
    if oracles.len() < 2 || mas < 2 {
        return Err(SearchError::NeedTwoMas(mas));
    }
    let mut x = x.clone();
    let mut previous: Option<Vec<Prediction>> = None;
    let mut schedule = StallSchedule::new(cfg.stall_scale, cfg.target_dconf);
    let mut steps = 0;
    loop {
        let results = query_all(oracles, &x, true)?;
        let decision = select_target(&results)?;
        let target = match decision {
            Decision::Found { ma_id, label } => {
                let (ma, label, contrast) = found(&results, ma_id, label);
                return Ok(RemoteOutcome {
                    sample: x,
                    success: true,
                    identified_ma: Some(ma),
                    identifying_label: Some(label),
                    contrast_label: contrast,
                    steps,
                });
            }
            Decision::Approach { target } | Decision::AllAgree { target } => target,
        };
        if steps == cfg.remote_max {
            return Ok(RemoteOutcome {
                sample: x,
                success: false,
                identified_ma: None,
                identifying_label: None,
                contrast_label: None,
                steps,
            });
        }
        let round: Vec<Prediction> = results.iter().map(|r| r.prediction.clone()).collect();
        let stalled = previous
            .as_ref()
            .is_some_and(|p| p.iter().zip(&round).all(|(a, b)| a.same_as(b)));
        let chosen = &results[target];
        let d = schedule.update(stalled, chosen.prediction.dconf);
        let majority = select::majority_label(&results, None).expect("non-empty results");
        let grad = chosen
            .gradient
            .as_ref()
            .ok_or(SearchError::MissingGradient(chosen.oracle.index))?;
        let c = correctness_sign(&chosen.prediction, majority);
        let g = reference_margin_gradient(grad, &chosen.prediction, majority);
        x = fgsm_step(&x, c, d, cfg.alpha, &g, cfg.clamp_range)?;
        previous = Some(round);
        steps += 1;
    }
}

/// Full search from host sample `x0`: an entry check, the local phase on
/// `oracles[local]`, then the remote phase over all oracles.
pub fn generate(
    oracles: &mut [BoxedOracle],
    local: usize,
    x0: &Tensor,
    cfg: &SearchConfig,
) -> Result<BoundaryResult, SearchError> {
    cfg.validate()?;
    let mas = ma_count(oracles);
    if mas < 2 {
        return Err(SearchError::NeedTwoMas(mas));
    }
    if local >= oracles.len() {
        return Err(SearchError::BadLocalIndex {
            index: local,
            count: oracles.len(),
        });
    }
    let before = QueryLedger::snapshot(oracles).total();
    let queries = |oracles: &[BoxedOracle]| {
        let after = QueryLedger::snapshot(oracles).total();
        QueryCounts {
            predict_count: after.predict_count - before.predict_count,
            gradient_count: after.gradient_count - before.gradient_count,
        }
    };

    let entry = query_all(oracles, x0, false)?;
    if let Decision::Found { ma_id, label } = select_target(&entry)? {
        let (ma, label, contrast) = found(&entry, ma_id, label);
        return Ok(BoundaryResult {
            sample: x0.clone(),
            success: true,
            identified_ma: Some(ma),
            identifying_label: Some(label),
            contrast_label: contrast,
            local_steps: 0,
            remote_steps: 0,
            local_reached: false,
            psnr_db: f64::INFINITY,
            queries: queries(oracles),
        });
    }

    let reference = entry[local].prediction.label;
    let local_out = local_phase(oracles[local].as_mut(), x0, reference, cfg)?;
    let remote = remote_phase(oracles, &local_out.sample, cfg)?;
    let psnr_db = psnr(x0, &remote.sample, 1.0)?;
    Ok(BoundaryResult {
        sample: remote.sample,
        success: remote.success,
        identified_ma: remote.identified_ma,
        identifying_label: remote.identifying_label,
        contrast_label: remote.contrast_label,
        local_steps: local_out.steps,
        remote_steps: remote.steps,
        local_reached: local_out.reached,
        psnr_db,
        queries: queries(oracles),
    })
}

/// Summary of a run that does not depend on whether the sample is retained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub success: bool,
    pub identified_ma: Option<u32>,
    pub identifying_label: Option<usize>,
    pub contrast_label: Option<usize>,
    pub local_steps: usize,
    pub remote_steps: usize,
    #[serde(with = "crate::metrics::float_text")]
    pub psnr_db: f64,
}

impl From<&BoundaryResult> for RunSummary {
    fn from(r: &BoundaryResult) -> Self {
        Self {
            success: r.success,
            identified_ma: r.identified_ma,
            identifying_label: r.identifying_label,
            contrast_label: r.contrast_label,
            local_steps: r.local_steps,
            remote_steps: r.remote_steps,
            psnr_db: r.psnr_db,
        }
    }
}
