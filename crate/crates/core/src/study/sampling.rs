use std::collections::BTreeMap;

use log::info;
use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use super::{Sampling, StudyError};
use crate::corpus::Label;
use crate::explainer::{splime_select, Explanation};
use crate::seed::rng_for;

pub const INPUT_SAMPLE_SIZE: usize = 10;
pub const TASK_PER_CELL: usize = 5;
pub const TASK_SAMPLE_SIZE: usize = 4 * TASK_PER_CELL;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputSample {
    /// In SP-LIME pick order.
    pub doc_ids: Vec<String>,
    /// How many of the picks the model classifies correctly.
    pub n_correct: usize,
}

/// SP-LIME over the dev explanations. The correctness mix is reported, not
/// controlled.
pub fn sample_input_reviews(
    pool: &[Explanation],
    groundtruth: &BTreeMap<String, Label>,
) -> Result<InputSample, StudyError> {
    if pool.len() < INPUT_SAMPLE_SIZE {
        return Err(StudyError::PoolTooSmall {
            pool: pool.len(),
            needed: INPUT_SAMPLE_SIZE,
        });
    }
    let doc_ids = splime_select(pool, INPUT_SAMPLE_SIZE)?;
    let mut n_correct = 0;
    for id in &doc_ids {
        let truth = groundtruth.get(id).ok_or_else(|| StudyError::Missing {
            what: "groundtruth",
            doc_id: id.clone(),
        })?;
        let expl = pool.iter().find(|e| &e.doc_id == id).expect("picked from pool");
        if expl.prediction.label == *truth {
            n_correct += 1;
        }
    }
    info!("input sample: {n_correct}/{} predicted correctly", doc_ids.len());
    Ok(InputSample { doc_ids, n_correct })
}

/// A test review with its model prediction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskCandidate {
    pub doc_id: String,
    pub groundtruth: Label,
    pub ai_label: Label,
}

/// Five reviews from each (groundtruth, AI correct?) cell, shuffled.
///
/// Fixed mode draws with `fixed_seed`, so every session gets the same list;
/// random mode draws with `session_seed`.
pub fn sample_task_reviews(
    candidates: &[TaskCandidate],
    mode: Sampling,
    fixed_seed: u64,
    session_seed: u64,
) -> Result<Vec<String>, StudyError> {
    let seed = match mode {
        Sampling::Fixed => fixed_seed,
        Sampling::Random => session_seed,
    };
    let mut cells: BTreeMap<(Label, bool), Vec<&str>> = BTreeMap::new();
    for label in [Label::Positive, Label::Negative] {
        for correct in [true, false] {
            cells.insert((label, correct), Vec::new());
        }
    }
    for c in candidates {
        cells
            .get_mut(&(c.groundtruth, c.ai_label == c.groundtruth))
            .expect("all cells present")
            .push(&c.doc_id);
    }
    for ((groundtruth, ai_correct), ids) in cells.iter_mut() {
        if ids.len() < TASK_PER_CELL {
            return Err(StudyError::CellShort {
                groundtruth: *groundtruth,
                ai_correct: *ai_correct,
                available: ids.len(),
                needed: TASK_PER_CELL,
            });
        }
        ids.sort_unstable();
        ids.dedup();
    }
    let mut rng = rng_for(seed, "task-sample");
    let mut picked = Vec::with_capacity(TASK_SAMPLE_SIZE);
    for ids in cells.values() {
        picked.extend(index::sample(&mut rng, ids.len(), TASK_PER_CELL).into_iter().map(|i| ids[i].to_string()));
    }
    picked.shuffle(&mut rng);
    Ok(picked)
}
