//! Session orchestration shared by the HTTP server and the simulator.
//!
//! Each operation validates against a copy of the session, appends its event
//! to the store, and only then commits the copy. Sessions are locked
//! individually; the engine-wide lock only guards session creation.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use log::{info, warn};
use selex_core::belief::{BeliefModel, Elicitation, InputRecord, Signal};
use selex_core::classifier::Prediction;
use selex_core::corpus::Label;
use selex_core::selector::{render_plain, render_states, RenderOptions, SelectiveExplanation, WireRendering};
use selex_core::study::{
    sample_task_reviews, Condition, ConditionName, Decision, InputSource, Phase, Session, StudyError, SurveyRatings,
    SurveyResponse,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::export::{build_bundle, ExportBundle};
use crate::pipeline::{PipelineError, StudyData};
use crate::store::{Event, LogEntry, Store, StoreError};

/// Model reference of sessions whose input could not train a belief model;
/// their task phase shows unselected explanations.
pub const NO_MODEL: &str = "none";
pub const PANEL_MODEL: &str = "panel";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no critique input from earlier participants to build the panel model")]
    PanelUnavailable,
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
    }
}

/// A clock that only moves when told to.
#[derive(Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start: u64) -> ManualClock {
        ManualClock(AtomicU64::new(start))
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub condition: String,
    pub phase: Phase,
    pub input_done: usize,
    pub input_total: usize,
    pub decisions: usize,
    pub task_total: usize,
}

impl From<&Session> for SessionView {
    fn from(s: &Session) -> Self {
        SessionView {
            session_id: s.session_id.clone(),
            condition: s.condition.to_string(),
            phase: s.phase,
            input_done: s.inputs_done.len(),
            input_total: s.input_review_ids.len(),
            decisions: s.decisions.len(),
            task_total: s.task_review_ids.len(),
        }
    }
}

/// Payload for the item a participant should answer next.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NextItem {
    pub session_id: String,
    pub phase: Phase,
    pub doc_id: String,
    pub index: usize,
    pub total: usize,
    pub rendering: WireRendering,
    /// Input phase only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub elicitation: Option<Elicitation>,
    /// Words to agree or disagree with (critique input only).
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub keywords: Vec<String>,
    /// Task phase only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ai_prediction: Option<Prediction>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputItem {
    pub word: String,
    pub signal: Signal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputSubmission {
    pub doc_id: String,
    #[serde(default)]
    pub records: Vec<InputItem>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub doc_id: String,
    pub label: Label,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurveySubmission {
    pub ratings: SurveyRatings,
    #[serde(default)]
    pub demographics: BTreeMap<String, String>,
}

struct Slot {
    session: Session,
    last_seq: u64,
    records: Vec<InputRecord>,
}

#[derive(Default)]
struct Registry {
    sessions: BTreeMap<String, Arc<Mutex<Slot>>>,
    auto_assigned: usize,
}

pub struct Engine {
    config: Config,
    config_hash: String,
    data: Arc<StudyData>,
    store: Store,
    clock: Arc<dyn Clock>,
    roster: Vec<Condition>,
    registry: Mutex<Registry>,
    panel: Mutex<Option<Arc<BeliefModel>>>,
    models: Mutex<HashMap<String, Arc<BeliefModel>>>,
}

impl Engine {
    /// Open the store named in `config` and recover every session.
    pub fn open(config: Config, data: Arc<StudyData>, clock: Arc<dyn Clock>) -> Result<Engine, EngineError> {
        let (store, recovered) = Store::open(&config.server.store_dir)?;
        let mut records: HashMap<String, Vec<InputRecord>> = HashMap::new();
        for e in &recovered.entries {
            if let Event::InputSubmitted { session_id, records: r, .. } = &e.event {
                records.entry(session_id.clone()).or_default().extend(r.iter().cloned());
            }
        }
        let mut registry = Registry::default();
        for (id, (session, last_seq)) in recovered.sessions {
            if session.auto_assigned {
                registry.auto_assigned += 1;
            }
            let slot = Slot {
                records: records.remove(&id).unwrap_or_default(),
                session,
                last_seq,
            };
            registry.sessions.insert(id, Arc::new(Mutex::new(slot)));
        }
        let panel = store.load_model(&panel_model_ref())?.map(Arc::new);
        let engine = Engine {
            config_hash: config.hash(),
            roster: config.roster_cycle(),
            config,
            data,
            store,
            clock,
            registry: Mutex::new(registry),
            panel: Mutex::new(panel),
            models: Mutex::new(HashMap::new()),
        };
        // sessions that crashed between their last input and model persistence
        let pending: Vec<_> = engine
            .slots()
            .into_iter()
            .filter(|s| s.lock().expect("slot lock").session.phase == Phase::Training)
            .collect();
        for slot in pending {
            let mut guard = slot.lock().expect("slot lock");
            info!("finishing belief training for {}", guard.session.session_id);
            engine.train_and_attach(&mut guard)?;
        }
        Ok(engine)
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn data(&self) -> &StudyData {
        &self.data
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    fn slots(&self) -> Vec<Arc<Mutex<Slot>>> {
        self.registry.lock().expect("registry lock").sessions.values().cloned().collect()
    }

    fn slot(&self, id: &str) -> Result<Arc<Mutex<Slot>>, EngineError> {
        self.registry
            .lock()
            .expect("registry lock")
            .sessions
            .get(id)
            .cloned()
            .ok_or_else(|| EngineError::UnknownSession(id.to_string()))
    }

    /// Validate `op` on a copy, log `event`, snapshot, then commit.
    fn commit<R>(
        &self,
        slot: &mut Slot,
        op: impl FnOnce(&mut Session, u64) -> Result<(Option<Event>, R), EngineError>,
    ) -> Result<R, EngineError> {
        let now = self.clock.now_ms();
        let mut draft = slot.session.clone();
        let (event, out) = op(&mut draft, now)?;
        if let Some(event) = event {
            let entry = self.store.append(now, event)?;
            self.store.write_snapshot(&draft, entry.seq)?;
            slot.last_seq = entry.seq;
            if let Event::InputSubmitted { records, .. } = entry.event {
                slot.records.extend(records);
            }
        }
        slot.session = draft;
        Ok(out)
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.registry.lock().expect("registry lock").sessions.keys().cloned().collect()
    }

    pub fn session(&self, id: &str) -> Result<Session, EngineError> {
        Ok(self.slot(id)?.lock().expect("slot lock").session.clone())
    }

    /// Start a session in the requested condition, or the next roster
    /// condition if none is given.
    pub fn create_session(&self, requested: Option<&str>) -> Result<Session, EngineError> {
        let requested: Option<Condition> = requested.map(str::parse).transpose()?;
        let wants_panel = match requested {
            Some(c) => c.input_source() == InputSource::Panel,
            None => self.roster.iter().any(|c| c.input_source() == InputSource::Panel),
        };
        // built before taking the registry lock because it reads every session
        let panel_ready = wants_panel && self.panel_model().is_ok();
        let mut registry = self.registry.lock().expect("registry lock");
        let (condition, auto) = match requested {
            Some(c) => (c, false),
            None => (self.roster[registry.auto_assigned % self.roster.len()], true),
        };
        let model_ref = match condition.input_source() {
            InputSource::Panel if panel_ready => Some(panel_model_ref()),
            InputSource::Panel => return Err(EngineError::PanelUnavailable),
            _ => None,
        };
        let id = format!("s{:04}", registry.sessions.len() + 1);
        let seed = self.config.session_seed(&id);
        let tasks = sample_task_reviews(&self.data.task_candidates, condition.sampling, self.config.fixed_task_seed(), seed)?;
        let now = self.clock.now_ms();
        let mut session = Session::new(&id, condition, seed, self.data.input_sample.doc_ids.clone(), tasks, now);
        session.auto_assigned = auto;
        session.belief_model_ref = model_ref;
        let entry = self.store.append(now, Event::SessionCreated { session: session.clone() })?;
        self.store.write_snapshot(&session, entry.seq)?;
        if auto {
            registry.auto_assigned += 1;
        }
        registry.sessions.insert(
            id,
            Arc::new(Mutex::new(Slot {
                session: session.clone(),
                last_seq: entry.seq,
                records: Vec::new(),
            })),
        );
        Ok(session)
    }

    pub fn consent(&self, id: &str) -> Result<Session, EngineError> {
        let slot = self.slot(id)?;
        let mut slot = slot.lock().expect("slot lock");
        self.commit(&mut slot, |s, now| {
            s.consent(now)?;
            Ok((Some(Event::Consented { session_id: s.session_id.clone() }), ()))
        })?;
        Ok(slot.session.clone())
    }

    /// The current item; repeated calls return the same payload.
    pub fn next_item(&self, id: &str) -> Result<NextItem, EngineError> {
        let slot = self.slot(id)?;
        let mut slot = slot.lock().expect("slot lock");
        let item = self.commit(&mut slot, |s, now| {
            let before = s.served_at.len();
            let item = s.next_item(now)?;
            let event = (s.served_at.len() > before).then(|| Event::Served {
                session_id: s.session_id.clone(),
                doc_id: item.doc_id.clone(),
            });
            Ok((event, item))
        })?;
        let review = &self.data.reviews[&item.doc_id];
        let expl = self
            .data
            .explanation(&item.doc_id)
            .ok_or_else(|| PipelineError::MissingExplanation(item.doc_id.clone()))?;
        let session = &slot.session;
        let mut payload = NextItem {
            session_id: session.session_id.clone(),
            phase: item.phase,
            doc_id: item.doc_id.clone(),
            index: item.index,
            total: item.total,
            rendering: render_plain(review).to_wire(review),
            elicitation: None,
            keywords: Vec::new(),
            ai_prediction: None,
        };
        match item.phase {
            Phase::Input => {
                let elicitation = session.condition.elicitation().expect("input phase implies self input");
                payload.elicitation = Some(elicitation);
                if elicitation == Elicitation::Critique {
                    payload.keywords = expl.keywords().map(str::to_string).collect();
                    payload.rendering = self.render(session, &item.doc_id, false)?.to_wire(review);
                }
            }
            _ => {
                payload.ai_prediction = Some(expl.prediction);
                payload.rendering = self.render(session, &item.doc_id, true)?.to_wire(review);
            }
        }
        Ok(payload)
    }

    /// Rendering of `doc_id` for this session: the original explanation, or
    /// the selective one in the task phase of a selective condition.
    pub fn render(&self, session: &Session, doc_id: &str, task: bool) -> Result<SelectiveExplanation, EngineError> {
        let review = self
            .data
            .reviews
            .get(doc_id)
            .ok_or_else(|| StudyError::UnknownDoc(doc_id.to_string()))?;
        let expl = self
            .data
            .explanation(doc_id)
            .ok_or_else(|| PipelineError::MissingExplanation(doc_id.to_string()))?;
        let model = match (&session.belief_model_ref, task && session.condition.is_selective()) {
            (Some(r), true) => self.model(r)?,
            _ => None,
        };
        let options = RenderOptions {
            gray_unknown: self.config.belief.gray_unknown,
        };
        Ok(render_states(expl, review, model.as_deref(), &self.data.embeddings, options).expect("ids match"))
    }

    fn model(&self, model_ref: &str) -> Result<Option<Arc<BeliefModel>>, EngineError> {
        if model_ref == NO_MODEL {
            return Ok(None);
        }
        if model_ref == panel_model_ref() {
            return Ok(self.panel.lock().expect("panel lock").clone());
        }
        let mut cache = self.models.lock().expect("model cache lock");
        if let Some(m) = cache.get(model_ref) {
            return Ok(Some(m.clone()));
        }
        let model = self.store.load_model(model_ref)?.map(Arc::new);
        if let Some(m) = &model {
            cache.insert(model_ref.to_string(), m.clone());
        }
        Ok(model)
    }

    /// The shared panel model, built on first use from the critique input of
    /// every session that has finished its input phase.
    pub fn panel_model(&self) -> Result<Arc<BeliefModel>, EngineError> {
        let mut panel = self.panel.lock().expect("panel lock");
        if let Some(m) = panel.as_ref() {
            return Ok(m.clone());
        }
        let mut records = Vec::new();
        for slot in self.slots() {
            let slot = slot.lock().expect("slot lock");
            if slot.session.condition.name == ConditionName::Critique && slot.session.phase > Phase::Input {
                records.extend(slot.records.iter().cloned());
            }
        }
        if records.is_empty() {
            return Err(EngineError::PanelUnavailable);
        }
        let model = self
            .data
            .train_panel_model(&records, self.config.panel_seed(), self.config.belief.reg_strength)?;
        self.store.save_model(PANEL_MODEL, &model)?;
        info!("panel model trained on {} critique records", records.len());
        let model = Arc::new(model);
        *panel = Some(model.clone());
        Ok(model)
    }

    pub fn submit_input(&self, id: &str, submission: InputSubmission) -> Result<Session, EngineError> {
        let slot = self.slot(id)?;
        let mut slot = slot.lock().expect("slot lock");
        let data = &self.data;
        self.commit(&mut slot, |s, now| {
            if s.phase != Phase::Input {
                return Err(StudyError::WrongPhase {
                    expected: Phase::Input.to_string(),
                    actual: s.phase,
                }
                .into());
            }
            let elicitation = s.condition.elicitation().expect("input phase implies self input");
            let doc_id = &submission.doc_id;
            let review = data.reviews.get(doc_id).ok_or_else(|| StudyError::UnknownDoc(doc_id.clone()))?;
            let keywords: Vec<&str> = data.explanation(doc_id).map(|e| e.keywords().collect()).unwrap_or_default();
            let mut records: Vec<InputRecord> = Vec::with_capacity(submission.records.len());
            for item in &submission.records {
                if records.iter().any(|r| r.word == item.word) {
                    return Err(EngineError::InvalidInput(format!("{:?} answered twice", item.word)));
                }
                let record = InputRecord {
                    session_id: s.session_id.clone(),
                    doc_id: doc_id.clone(),
                    word: item.word.clone(),
                    signal: item.signal,
                    elicitation,
                    timestamp: now,
                };
                record
                    .validate(keywords.iter().copied())
                    .map_err(|e| EngineError::InvalidInput(e.to_string()))?;
                if !review.tokens.iter().any(|t| t.word == item.word) {
                    return Err(EngineError::InvalidInput(format!("{:?} does not occur in {doc_id}", item.word)));
                }
                records.push(record);
            }
            if elicitation == Elicitation::Critique {
                if let Some(missing) = keywords.iter().find(|k| !records.iter().any(|r| r.word == **k)) {
                    return Err(EngineError::InvalidInput(format!("keyword {missing:?} has no answer")));
                }
            }
            s.complete_input_item(doc_id, now)?;
            let event = Event::InputSubmitted {
                session_id: s.session_id.clone(),
                doc_id: doc_id.clone(),
                records,
            };
            Ok((Some(event), ()))
        })?;
        if slot.session.phase == Phase::Training {
            self.train_and_attach(&mut slot)?;
        }
        Ok(slot.session.clone())
    }

    fn train_and_attach(&self, slot: &mut Slot) -> Result<(), EngineError> {
        let id = slot.session.session_id.clone();
        let model_ref = match self
            .data
            .train_belief_model(&slot.records, slot.session.seed, self.config.belief.reg_strength)
        {
            Ok(model) => self.store.save_model(&id, &model)?,
            Err(e) => {
                warn!("session {id}: no belief model ({e}); showing unselected explanations");
                NO_MODEL.to_string()
            }
        };
        self.commit(slot, |s, now| {
            s.attach_belief(model_ref.clone(), now)?;
            Ok((
                Some(Event::BeliefAttached {
                    session_id: id.clone(),
                    model_ref: model_ref.clone(),
                }),
                (),
            ))
        })
    }

    pub fn record_decision(&self, id: &str, request: DecisionRequest) -> Result<Decision, EngineError> {
        let slot = self.slot(id)?;
        let mut slot = slot.lock().expect("slot lock");
        let data = &self.data;
        self.commit(&mut slot, |s, now| {
            let doc_id = &request.doc_id;
            let missing = || StudyError::UnknownDoc(doc_id.clone());
            let groundtruth = data.groundtruth(doc_id).ok_or_else(missing)?;
            let ai_label = data.test_explanations.get(doc_id).ok_or_else(missing)?.prediction.label;
            let elapsed = s.elapsed_since_served(doc_id, now);
            let decision = s.record_decision(doc_id, request.label, ai_label, groundtruth, elapsed, now)?;
            Ok((Some(Event::DecisionRecorded { decision: decision.clone() }), decision))
        })
    }

    pub fn submit_survey(&self, id: &str, submission: SurveySubmission) -> Result<Session, EngineError> {
        submission.ratings.validate()?;
        let slot = self.slot(id)?;
        let mut slot = slot.lock().expect("slot lock");
        self.commit(&mut slot, |s, now| {
            s.complete_survey(now)?;
            let response = SurveyResponse {
                session_id: s.session_id.clone(),
                ratings: submission.ratings,
                demographics: submission.demographics,
                submitted_at: now,
            };
            Ok((Some(Event::SurveySubmitted { response }), ()))
        })?;
        Ok(slot.session.clone())
    }

    pub fn input_records(&self, id: &str) -> Result<Vec<InputRecord>, EngineError> {
        Ok(self.slot(id)?.lock().expect("slot lock").records.clone())
    }

    pub fn log_entries(&self) -> Result<Vec<LogEntry>, EngineError> {
        Ok(self.store.entries()?)
    }

    pub fn export(&self) -> Result<ExportBundle, EngineError> {
        Ok(build_bundle(&self.log_entries()?, &self.config_hash))
    }
}

fn panel_model_ref() -> String {
    format!("models/{PANEL_MODEL}.json")
}
