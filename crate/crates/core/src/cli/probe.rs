use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use anyhow::Context;

use crate::data::load_sample;
use crate::model::{load_model, Prediction};

use super::spec::{open_oracles, OracleSpec};

/// A microarchitecture whose oracles all give a label no other MA gives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Identification {
    pub ma_id: u32,
    pub label: usize,
    pub contrast: Option<usize>,
}

/// Decide from `(ma_id, label)` pairs, in oracle order, which MA a sample
/// singles out. Several MAs can hold private labels (always so with two);
/// the one with the fewest oracles wins, then the one queried first.
/// The contrast is the label most of the remaining oracles give.
pub fn verdict(answers: &[(u32, usize)]) -> Option<Identification> {
    let mut by_ma: BTreeMap<u32, (usize, Vec<usize>)> = BTreeMap::new();
    for (pos, &(ma, label)) in answers.iter().enumerate() {
        by_ma.entry(ma).or_insert((pos, Vec::new())).1.push(label);
    }
    let private = |ma: u32, labels: &[usize]| {
        let label = labels[0];
        let uniform = labels.iter().all(|&l| l == label);
        let shared = answers.iter().any(|&(m, l)| m != ma && l == label);
        (uniform && !shared).then_some(label)
    };
    let (ma_id, label) = by_ma
        .iter()
        .filter_map(|(&ma, (first, labels))| private(ma, labels).map(|l| ((labels.len(), *first), ma, l)))
        .min()
        .map(|(_, ma, l)| (ma, l))?;

    let mut counts: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (pos, &(m, l)) in answers.iter().enumerate() {
        if m != ma_id {
            let e = counts.entry(l).or_insert((0, pos));
            e.0 += 1;
        }
    }
    let contrast = counts
        .into_iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .map(|(l, _)| l);
    Some(Identification { ma_id, label, contrast })
}

pub struct ProbeOutcome {
    pub answers: Vec<(OracleSpec, Prediction)>,
    pub verdict: Option<Identification>,
}

pub fn probe(model_path: &Path, sample_path: &Path, specs: &[OracleSpec]) -> anyhow::Result<ProbeOutcome> {
    let sample = load_sample(sample_path).with_context(|| format!("reading sample {}", sample_path.display()))?;
    let model = Arc::new(load_model(model_path).with_context(|| format!("loading model {}", model_path.display()))?);
    let mut oracles = open_oracles(specs, &model)?;
    let mut answers = Vec::with_capacity(specs.len());
    for (spec, oracle) in specs.iter().zip(oracles.iter_mut()) {
        let p = oracle
            .predict(&sample)
            .with_context(|| format!("querying oracle {spec}"))?
            .prediction;
        answers.push((spec.clone(), p));
    }
    let pairs: Vec<(u32, usize)> = answers.iter().map(|(s, p)| (s.ma_id, p.label)).collect();
    Ok(ProbeOutcome {
        verdict: verdict(&pairs),
        answers,
    })
}
