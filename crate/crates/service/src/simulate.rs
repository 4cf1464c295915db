//! Runs whole sessions with simulated participants against the engine.
//!
//! Annotation comes from an [`OracleAnnotator`]; task decisions from a
//! [`HighlightFollower`]. Time is driven by a [`ManualClock`], so a run is
//! fully determined by the config, the oracle and the plan.

use std::collections::BTreeMap;

use rand::Rng;
use selex_core::belief::Elicitation;
use selex_core::study::{simulate_input, Condition, HighlightFollower, OracleAnnotator, Phase, SurveyRatings};

use crate::engine::{Clock, DecisionRequest, Engine, EngineError, InputItem, InputSubmission, ManualClock, SurveySubmission};

/// Simulated time spent on one input item.
fn input_ms(n_keywords: usize, n_tokens: usize) -> u64 {
    4_000 + 40 * n_tokens as u64 + 600 * n_keywords as u64
}

/// Simulated time spent reading one review and deciding.
fn decision_ms(n_tokens: usize) -> u64 {
    3_000 + 25 * n_tokens as u64
}

#[derive(Clone, Debug)]
pub struct SimulationPlan {
    /// Run in this order; panel conditions need critique sessions before them.
    pub conditions: Vec<Condition>,
    pub sessions_per_condition: usize,
    pub oracle: OracleAnnotator,
}

pub fn run(engine: &Engine, clock: &ManualClock, plan: &SimulationPlan) -> Result<Vec<String>, EngineError> {
    let mut ids = Vec::new();
    for condition in &plan.conditions {
        for _ in 0..plan.sessions_per_condition {
            ids.push(run_session(engine, clock, *condition, &plan.oracle)?);
        }
    }
    Ok(ids)
}

pub fn run_session(engine: &Engine, clock: &ManualClock, condition: Condition, oracle: &OracleAnnotator) -> Result<String, EngineError> {
    let session = engine.create_session(Some(&condition.to_string()))?;
    drive(engine, clock, &session.session_id, oracle, usize::MAX)?;
    Ok(session.session_id)
}

/// Advance an existing session by at most `max_steps` participant actions,
/// or until it is done. Returns the phase it stopped in.
pub fn drive(engine: &Engine, clock: &ManualClock, id: &str, oracle: &OracleAnnotator, max_steps: usize) -> Result<Phase, EngineError> {
    let data = engine.data();
    for _ in 0..max_steps {
        let session = engine.session(id)?;
        match session.phase {
            Phase::Consent => {
                clock.advance(1_000);
                engine.consent(id)?;
            }
            Phase::Input => {
                let item = engine.next_item(id)?;
                let review = &data.reviews[&item.doc_id];
                let elicitation = item.elicitation.expect("input items carry an elicitation");
                let explanations: BTreeMap<_, _> = data
                    .explanation(&item.doc_id)
                    .map(|e| (item.doc_id.clone(), e.clone()))
                    .into_iter()
                    .collect();
                let records = simulate_input(oracle, &[review], &explanations, elicitation, id, clock.now_ms())?;
                let n_keywords = if elicitation == Elicitation::Critique { item.keywords.len() } else { records.len() };
                clock.advance(input_ms(n_keywords, review.tokens.len()));
                let submission = InputSubmission {
                    doc_id: item.doc_id,
                    records: records
                        .into_iter()
                        .map(|r| InputItem {
                            word: r.word,
                            signal: r.signal,
                        })
                        .collect(),
                };
                engine.submit_input(id, submission)?;
            }
            Phase::Task => {
                let item = engine.next_item(id)?;
                let review = &data.reviews[&item.doc_id];
                let rendering = engine.render(&session, &item.doc_id, true)?;
                let ai = item.ai_prediction.expect("task items carry the prediction").label;
                let label = HighlightFollower.decide(&rendering, ai);
                clock.advance(decision_ms(review.tokens.len()));
                engine.record_decision(id, DecisionRequest { doc_id: item.doc_id, label })?;
            }
            Phase::Survey => {
                let mut rng = selex_core::seed::rng_for(session.seed, "survey");
                let mut r = || rng.random_range(1..=5u8);
                let ratings = SurveyRatings {
                    mental_demand: r(),
                    success: r(),
                    negative_emotion: r(),
                    helpfulness: r(),
                    ease: r(),
                    confidence: r(),
                    understanding: r(),
                };
                clock.advance(20_000);
                engine.submit_survey(
                    id,
                    SurveySubmission {
                        ratings,
                        demographics: BTreeMap::from([("source".to_string(), "simulated".to_string())]),
                    },
                )?;
            }
            Phase::Done => return Ok(Phase::Done),
            Phase::Training => unreachable!("engine advances past training"),
        }
    }
    Ok(engine.session(id)?.phase)
}
