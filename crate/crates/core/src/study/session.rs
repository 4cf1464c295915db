//! Session phase machine.
//!
//! ```text
//! consent ──► input ──► training ──► task ──► survey ──► done
//!    └───────────────────────────────►┘        (no self input)
//! ```
//!
//! `training` is the sub-state between the last input item and the task
//! phase; it ends when the session's belief model has been persisted.
//! Transitions only move forward. All methods take the current time so the
//! same code runs against a wall clock or a simulated one.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Condition, Decision, InputSource, StudyError};
use crate::corpus::Label;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Consent,
    Input,
    Training,
    Task,
    Survey,
    Done,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Consent => "consent",
            Phase::Input => "input",
            Phase::Training => "training",
            Phase::Task => "task",
            Phase::Survey => "survey",
            Phase::Done => "done",
        })
    }
}

/// Millisecond timestamps of phase entries.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseClock {
    pub created: u64,
    pub input_started: Option<u64>,
    pub training_started: Option<u64>,
    pub task_started: Option<u64>,
    pub survey_started: Option<u64>,
    pub done: Option<u64>,
}

/// The item a session should answer next.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemRef {
    pub phase: Phase,
    pub doc_id: String,
    /// 0-based position within the phase.
    pub index: usize,
    pub total: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub condition: Condition,
    pub phase: Phase,
    pub seed: u64,
    /// Empty unless the condition collects the participant's own input.
    pub input_review_ids: Vec<String>,
    pub task_review_ids: Vec<String>,
    pub belief_model_ref: Option<String>,
    pub clock: PhaseClock,
    pub inputs_done: Vec<String>,
    pub decisions: Vec<Decision>,
    /// First time each item was served.
    pub served_at: BTreeMap<String, u64>,
    /// Assigned by round-robin rather than requested.
    pub auto_assigned: bool,
}

impl Session {
    pub fn new(
        session_id: impl Into<String>,
        condition: Condition,
        seed: u64,
        input_review_ids: Vec<String>,
        task_review_ids: Vec<String>,
        now: u64,
    ) -> Session {
        let input_review_ids = if condition.input_source() == InputSource::SelfInput {
            input_review_ids
        } else {
            Vec::new()
        };
        Session {
            session_id: session_id.into(),
            condition,
            phase: Phase::Consent,
            seed,
            input_review_ids,
            task_review_ids,
            belief_model_ref: None,
            clock: PhaseClock {
                created: now,
                ..PhaseClock::default()
            },
            inputs_done: Vec::new(),
            decisions: Vec::new(),
            served_at: BTreeMap::new(),
            auto_assigned: false,
        }
    }

    fn expect(&self, expected: Phase) -> Result<(), StudyError> {
        if self.phase == expected {
            Ok(())
        } else {
            Err(StudyError::WrongPhase {
                expected: expected.to_string(),
                actual: self.phase,
            })
        }
    }

    fn advance(&mut self, to: Phase, now: u64) {
        debug_assert!(to > self.phase, "phases only move forward");
        self.phase = to;
        let slot = match to {
            Phase::Consent => return,
            Phase::Input => &mut self.clock.input_started,
            Phase::Training => &mut self.clock.training_started,
            Phase::Task => &mut self.clock.task_started,
            Phase::Survey => &mut self.clock.survey_started,
            Phase::Done => &mut self.clock.done,
        };
        *slot = Some(now);
    }

    /// Phase entered after consent.
    pub fn phase_after_consent(&self) -> Phase {
        if self.condition.input_source() == InputSource::SelfInput {
            Phase::Input
        } else {
            Phase::Task
        }
    }

    pub fn consent(&mut self, now: u64) -> Result<Phase, StudyError> {
        self.expect(Phase::Consent)?;
        self.advance(self.phase_after_consent(), now);
        Ok(self.phase)
    }

    fn pending_input(&self) -> Option<(usize, &String)> {
        self.input_review_ids.iter().enumerate().find(|(_, id)| !self.inputs_done.contains(id))
    }

    fn pending_task(&self) -> Option<(usize, &String)> {
        self.task_review_ids
            .iter()
            .enumerate()
            .find(|(_, id)| !self.decisions.iter().any(|d| &d.doc_id == *id))
    }

    /// The next item in pinned order. Repeated calls return the same item
    /// and keep its first serve time.
    pub fn next_item(&mut self, now: u64) -> Result<ItemRef, StudyError> {
        let (index, doc_id, total) = match self.phase {
            Phase::Input => {
                let (i, id) = self.pending_input().expect("input phase has a pending item");
                (i, id.clone(), self.input_review_ids.len())
            }
            Phase::Task => {
                let (i, id) = self.pending_task().expect("task phase has a pending item");
                (i, id.clone(), self.task_review_ids.len())
            }
            actual => {
                return Err(StudyError::WrongPhase {
                    expected: "input or task".into(),
                    actual,
                })
            }
        };
        self.served_at.entry(doc_id.clone()).or_insert(now);
        Ok(ItemRef {
            phase: self.phase,
            doc_id,
            index,
            total,
        })
    }

    /// Milliseconds since `doc_id` was first served (0 if never served).
    pub fn elapsed_since_served(&self, doc_id: &str, now: u64) -> u64 {
        self.served_at.get(doc_id).map_or(0, |t| now.saturating_sub(*t))
    }

    /// Mark the current input item answered. After the last one the session
    /// enters `training`.
    pub fn complete_input_item(&mut self, doc_id: &str, now: u64) -> Result<Phase, StudyError> {
        self.expect(Phase::Input)?;
        if !self.input_review_ids.iter().any(|id| id == doc_id) {
            return Err(StudyError::UnknownDoc(doc_id.to_string()));
        }
        if self.inputs_done.iter().any(|id| id == doc_id) {
            return Err(StudyError::Duplicate(doc_id.to_string()));
        }
        let (_, expected) = self.pending_input().expect("input phase has a pending item");
        if expected != doc_id {
            return Err(StudyError::OutOfOrder {
                expected: expected.clone(),
                got: doc_id.to_string(),
            });
        }
        self.inputs_done.push(doc_id.to_string());
        if self.pending_input().is_none() {
            self.advance(Phase::Training, now);
        }
        Ok(self.phase)
    }

    /// The belief model is persisted; open the task phase.
    pub fn attach_belief(&mut self, model_ref: impl Into<String>, now: u64) -> Result<(), StudyError> {
        self.expect(Phase::Training)?;
        self.belief_model_ref = Some(model_ref.into());
        self.advance(Phase::Task, now);
        Ok(())
    }

    /// Record a task decision. After the last one the session enters `survey`.
    pub fn record_decision(
        &mut self,
        doc_id: &str,
        human_label: Label,
        ai_label: Label,
        groundtruth: Label,
        elapsed_ms: u64,
        now: u64,
    ) -> Result<Decision, StudyError> {
        self.expect(Phase::Task)?;
        if !self.task_review_ids.iter().any(|id| id == doc_id) {
            return Err(StudyError::UnknownDoc(doc_id.to_string()));
        }
        if self.decisions.iter().any(|d| d.doc_id == doc_id) {
            return Err(StudyError::Duplicate(doc_id.to_string()));
        }
        let decision = Decision {
            session_id: self.session_id.clone(),
            doc_id: doc_id.to_string(),
            human_label,
            ai_label,
            groundtruth,
            elapsed_ms,
        };
        self.decisions.push(decision.clone());
        if self.pending_task().is_none() {
            self.advance(Phase::Survey, now);
        }
        Ok(decision)
    }

    pub fn complete_survey(&mut self, now: u64) -> Result<(), StudyError> {
        self.expect(Phase::Survey)?;
        self.advance(Phase::Done, now);
        Ok(())
    }

    /// Phase-level task time: task entry until the last decision.
    pub fn task_phase_ms(&self) -> Option<u64> {
        Some(self.clock.survey_started?.saturating_sub(self.clock.task_started?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::study::{ConditionName, Sampling};

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    fn session(name: ConditionName) -> Session {
        Session::new("s1", Condition::new(name, Sampling::Fixed), 1, ids("in", 10), ids("t", 20), 0)
    }

    #[test]
    fn control_skips_input() {
        let mut s = session(ConditionName::Control);
        assert!(s.input_review_ids.is_empty());
        assert_eq!(s.phase_after_consent(), Phase::Task);
        assert_eq!(s.consent(5).unwrap(), Phase::Task);
        assert_eq!(s.clock.task_started, Some(5));
    }

    #[test]
    fn full_critique_flow() {
        let mut s = session(ConditionName::Critique);
        assert!(matches!(s.next_item(0), Err(StudyError::WrongPhase { .. })));
        s.consent(1).unwrap();
        for i in 0..10 {
            let item = s.next_item(10 + i).unwrap();
            assert_eq!(item.index, i as usize);
            assert_eq!(s.next_item(99).unwrap(), item);
            s.complete_input_item(&item.doc_id, 20 + i).unwrap();
        }
        assert_eq!(s.phase, Phase::Training);
        assert!(matches!(s.next_item(40), Err(StudyError::WrongPhase { .. })));
        assert!(s.record_decision("t0", Label::Positive, Label::Positive, Label::Positive, 1, 40).is_err());
        s.attach_belief("models/s1.json", 50).unwrap();
        for i in 0..20u64 {
            let item = s.next_item(100 + i).unwrap();
            s.record_decision(&item.doc_id, Label::Positive, Label::Negative, Label::Positive, 5, 200 + i).unwrap();
            if i < 19 {
                assert_eq!(s.phase, Phase::Task);
            }
        }
        assert_eq!(s.phase, Phase::Survey);
        assert_eq!(s.task_phase_ms(), Some(219 - 50));
        s.complete_survey(300).unwrap();
        assert_eq!(s.phase, Phase::Done);
    }

    #[test]
    fn decision_errors() {
        let mut s = session(ConditionName::Control);
        s.consent(0).unwrap();
        let l = Label::Positive;
        assert!(matches!(s.record_decision("zzz", l, l, l, 0, 0), Err(StudyError::UnknownDoc(_))));
        s.record_decision("t3", l, l, l, 0, 0).unwrap();
        assert!(matches!(s.record_decision("t3", l, l, l, 0, 0), Err(StudyError::Duplicate(_))));
    }

    #[test]
    fn input_must_follow_pinned_order() {
        let mut s = session(ConditionName::OpenEnded);
        s.consent(0).unwrap();
        assert!(matches!(s.complete_input_item("in3", 1), Err(StudyError::OutOfOrder { .. })));
        assert!(matches!(s.complete_input_item("x", 1), Err(StudyError::UnknownDoc(_))));
        s.complete_input_item("in0", 1).unwrap();
        assert!(matches!(s.complete_input_item("in0", 1), Err(StudyError::Duplicate(_))));
    }

    #[test]
    fn elapsed_uses_first_serve() {
        let mut s = session(ConditionName::Control);
        s.consent(0).unwrap();
        let item = s.next_item(100).unwrap();
        s.next_item(150).unwrap();
        assert_eq!(s.elapsed_since_served(&item.doc_id, 400), 300);
        assert_eq!(s.elapsed_since_served("never", 400), 0);
    }

    /// Drive every operation from every phase and check that only the
    /// allowed ones succeed and that the phase never moves backward.
    #[test]
    fn exhaustive_transitions() {
        #[derive(Clone, Copy, Debug)]
        enum Op {
            Consent,
            Next,
            Input,
            Attach,
            Decide,
            Survey,
        }
        let ops = [Op::Consent, Op::Next, Op::Input, Op::Attach, Op::Decide, Op::Survey];
        let allowed = |phase: Phase, op: Op| {
            matches!(
                (phase, op),
                (Phase::Consent, Op::Consent)
                    | (Phase::Input, Op::Next | Op::Input)
                    | (Phase::Training, Op::Attach)
                    | (Phase::Task, Op::Next | Op::Decide)
                    | (Phase::Survey, Op::Survey)
            )
        };
        for name in [ConditionName::Control, ConditionName::OpenEnded, ConditionName::Critique, ConditionName::PanelSelective] {
            // reach each phase, then try every op on a clone
            let mut s = session(name);
            let mut t = 0;
            loop {
                for op in ops {
                    let mut probe = s.clone();
                    let before = probe.phase;
                    let item = probe.clone().next_item(t).ok().map(|i| i.doc_id);
                    let doc = item.unwrap_or_else(|| "t0".into());
                    let l = Label::Positive;
                    let res = match op {
                        Op::Consent => probe.consent(t).map(|_| ()),
                        Op::Next => probe.next_item(t).map(|_| ()),
                        Op::Input => probe.complete_input_item(&doc, t).map(|_| ()),
                        Op::Attach => probe.attach_belief("m", t),
                        Op::Decide => probe.record_decision(&doc, l, l, l, 0, t).map(|_| ()),
                        Op::Survey => probe.complete_survey(t),
                    };
                    assert_eq!(res.is_ok(), allowed(before, op), "{name:?} {before:?} {op:?}");
                    if res.is_err() {
                        assert!(matches!(res, Err(StudyError::WrongPhase { .. })), "{name:?} {before:?} {op:?}");
                        assert_eq!(probe.phase, before);
                    }
                    assert!(probe.phase >= before);
                }
                t += 1;
                match s.phase {
                    Phase::Consent => {
                        s.consent(t).unwrap();
                    }
                    Phase::Input => {
                        let item = s.next_item(t).unwrap();
                        s.complete_input_item(&item.doc_id, t).unwrap();
                    }
                    Phase::Training => s.attach_belief("m", t).unwrap(),
                    Phase::Task => {
                        let item = s.next_item(t).unwrap();
                        let l = Label::Negative;
                        s.record_decision(&item.doc_id, l, l, l, 0, t).unwrap();
                    }
                    Phase::Survey => s.complete_survey(t).unwrap(),
                    Phase::Done => break,
                }
            }
        }
    }
}
