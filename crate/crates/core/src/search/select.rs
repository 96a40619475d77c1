use crate::oracle::OracleResult;

use super::SearchError;

/// What one query round over every oracle tells the search to do.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    /// One microarchitecture is singled out by `label`.
    Found { ma_id: u32, label: usize },
    /// Step toward the boundary of `results[target]`.
    Approach { target: usize },
    /// Every oracle agrees; step toward the closest boundary, `results[target]`.
    AllAgree { target: usize },
}

/// Results grouped by label, in order of first appearance.
pub(crate) fn partition(results: &[OracleResult]) -> Vec<(usize, Vec<usize>)> {
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for (i, r) in results.iter().enumerate() {
        let label = r.prediction.label;
        match groups.iter_mut().find(|(l, _)| *l == label) {
            Some((_, members)) => members.push(i),
            None => groups.push((label, vec![i])),
        }
    }
    groups
}

/// Smallest group; on equal sizes the one holding the lowest oracle index.
fn smallest(groups: &[(usize, Vec<usize>)], results: &[OracleResult]) -> usize {
    let key = |g: &(usize, Vec<usize>)| {
        let low = g.1.iter().map(|&i| results[i].oracle.index).min().unwrap_or(usize::MAX);
        (g.1.len(), low)
    };
    (0..groups.len()).min_by_key(|&g| key(&groups[g])).expect("non-empty")
}

/// Label held by the most oracles; ties go to the group with the lowest oracle index.
pub(crate) fn majority_label(results: &[OracleResult], exclude: Option<usize>) -> Option<usize> {
    partition(results)
        .into_iter()
        .filter(|(l, _)| Some(*l) != exclude)
        .max_by(|a, b| {
            let low = |g: &Vec<usize>| g.iter().map(|&i| results[i].oracle.index).min().unwrap_or(usize::MAX);
            a.1.len().cmp(&b.1.len()).then_with(|| low(&b.1).cmp(&low(&a.1)))
        })
        .map(|(l, _)| l)
}

pub fn select_target(results: &[OracleResult]) -> Result<Decision, SearchError> {
    if results.is_empty() {
        return Err(SearchError::EmptyResults);
    }
    let groups = partition(results);
    let (label, members) = &groups[smallest(&groups, results)];

    let ma = results[members[0]].oracle.ma_id;
    let single_ma = members.iter().all(|&i| results[i].oracle.ma_id == ma);
    let ma_elsewhere = results
        .iter()
        .enumerate()
        .any(|(i, r)| r.oracle.ma_id == ma && !members.contains(&i));
    if single_ma && !ma_elsewhere {
        return Ok(Decision::Found {
            ma_id: ma,
            label: *label,
        });
    }

    if groups.len() == 1 {
        let target = *members
            .iter()
            .min_by(|&&a, &&b| {
                results[a]
                    .prediction
                    .dconf
                    .total_cmp(&results[b].prediction.dconf)
                    .then(results[a].oracle.index.cmp(&results[b].oracle.index))
            })
            .expect("non-empty");
        return Ok(Decision::AllAgree { target });
    }

    // rank by descending gap; equal gaps keep the lower oracle index first
    let mut ranked = members.clone();
    ranked.sort_by(|&a, &b| {
        results[b]
            .prediction
            .dconf
            .total_cmp(&results[a].prediction.dconf)
            .then(results[a].oracle.index.cmp(&results[b].oracle.index))
    });
    let target = ranked.get(1).copied().unwrap_or(ranked[0]);
    Ok(Decision::Approach { target })
}
