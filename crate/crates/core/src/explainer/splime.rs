//! Submodular pick over a pool of keyword explanations.
//!
//! Each word gets a global weight `W(w) = sqrt(Σ |weight of w|)` summed over
//! every explanation in the pool. The greedy loop repeatedly picks the
//! explanation whose not-yet-covered keywords carry the most total `W`.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::{ExplainError, Explanation};

pub fn global_importance(pool: &[Explanation]) -> BTreeMap<String, f64> {
    let mut totals: BTreeMap<String, f64> = BTreeMap::new();
    for e in pool {
        for a in &e.attributions {
            *totals.entry(a.word.clone()).or_default() += a.weight.abs();
        }
    }
    totals.values_mut().for_each(|v| *v = v.sqrt());
    totals
}

/// Total global weight of the union of keywords of the picked explanations.
pub fn coverage(pool: &[Explanation], picked: &[usize], importance: &BTreeMap<String, f64>) -> f64 {
    let covered: BTreeSet<&str> = picked
        .iter()
        .flat_map(|&i| pool[i].attributions.iter().map(|a| a.word.as_str()))
        .collect();
    covered.iter().map(|w| importance.get(*w).copied().unwrap_or(0.0)).sum()
}

/// Greedily pick `k` doc ids; ties go to the smaller doc id.
pub fn splime_select(pool: &[Explanation], k: usize) -> Result<Vec<String>, ExplainError> {
    if pool.is_empty() {
        return Err(ExplainError::EmptyPool);
    }
    if k > pool.len() {
        return Err(ExplainError::PoolTooSmall { k, pool: pool.len() });
    }
    let importance = global_importance(pool);
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| pool[a].doc_id.cmp(&pool[b].doc_id));

    let mut covered: HashSet<&str> = HashSet::new();
    let mut picked = vec![false; pool.len()];
    let mut result = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for &i in &order {
            if picked[i] {
                continue;
            }
            let mut seen = HashSet::new();
            let gain: f64 = pool[i]
                .attributions
                .iter()
                .filter(|a| !covered.contains(a.word.as_str()) && seen.insert(a.word.as_str()))
                .map(|a| importance[&a.word])
                .sum();
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        let (i, _) = best.expect("k <= pool size");
        picked[i] = true;
        covered.extend(pool[i].attributions.iter().map(|a| a.word.as_str()));
        result.push(pool[i].doc_id.clone());
    }
    Ok(result)
}
