//! Durable study state: one append-only event log plus per-session snapshots.
//!
//! Every acknowledged operation is first appended (and fsynced) to
//! `events.jsonl`. Snapshots under `sessions/` are a restart shortcut:
//! on open, each session starts from its snapshot and replays any later
//! events. A torn final log line (crash mid-append) was never acknowledged
//! and is cut off.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use log::warn;
use selex_core::belief::{BeliefModel, InputRecord};
use selex_core::study::{Decision, Session, StudyError, SurveyResponse};
use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;
use thiserror::Error;

const LOG_FILE: &str = "events.jsonl";
const SESSION_DIR: &str = "sessions";
const MODEL_DIR: &str = "models";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: corrupt log entry: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("replaying event {seq}: {source}")]
    Replay { seq: u64, source: StudyError },
    #[error("event {seq} refers to unknown session {session_id:?}")]
    Orphan { seq: u64, session_id: String },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    SessionCreated { session: Session },
    Consented { session_id: String },
    Served { session_id: String, doc_id: String },
    InputSubmitted { session_id: String, doc_id: String, records: Vec<InputRecord> },
    BeliefAttached { session_id: String, model_ref: String },
    DecisionRecorded { decision: Decision },
    SurveySubmitted { response: SurveyResponse },
}

impl Event {
    pub fn session_id(&self) -> &str {
        match self {
            Event::SessionCreated { session } => &session.session_id,
            Event::Consented { session_id }
            | Event::Served { session_id, .. }
            | Event::InputSubmitted { session_id, .. }
            | Event::BeliefAttached { session_id, .. } => session_id,
            Event::DecisionRecorded { decision } => &decision.session_id,
            Event::SurveySubmitted { response } => &response.session_id,
        }
    }

    /// Apply to the session it belongs to, at time `at`.
    pub fn apply(&self, session: &mut Session, at: u64) -> Result<(), StudyError> {
        match self {
            Event::SessionCreated { .. } => Ok(()),
            Event::Consented { .. } => session.consent(at).map(|_| ()),
            Event::Served { doc_id, .. } => {
                session.served_at.entry(doc_id.clone()).or_insert(at);
                Ok(())
            }
            Event::InputSubmitted { doc_id, .. } => session.complete_input_item(doc_id, at).map(|_| ()),
            Event::BeliefAttached { model_ref, .. } => session.attach_belief(model_ref.clone(), at),
            Event::DecisionRecorded { decision: d } => session
                .record_decision(&d.doc_id, d.human_label, d.ai_label, d.groundtruth, d.elapsed_ms, at)
                .map(|_| ()),
            Event::SurveySubmitted { .. } => session.complete_survey(at),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub at: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    last_seq: u64,
    session: Session,
}

struct LogWriter {
    file: File,
    next_seq: u64,
}

pub struct Store {
    dir: PathBuf,
    log: Mutex<LogWriter>,
}

/// State rebuilt on open.
pub struct Recovered {
    pub sessions: BTreeMap<String, (Session, u64)>,
    pub entries: Vec<LogEntry>,
}

impl Store {
    pub fn open(dir: &Path) -> Result<(Store, Recovered), StoreError> {
        for sub in [SESSION_DIR, MODEL_DIR] {
            let p = dir.join(sub);
            fs::create_dir_all(&p).map_err(io_err(&p))?;
        }
        let log_path = dir.join(LOG_FILE);
        let entries = read_log(&log_path, true)?;
        let next_seq = entries.last().map_or(1, |e| e.seq + 1);
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(io_err(&log_path))?;
        let sessions = recover_sessions(dir, &entries)?;
        let store = Store {
            dir: dir.to_path_buf(),
            log: Mutex::new(LogWriter { file, next_seq }),
        };
        Ok((store, Recovered { sessions, entries }))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Append and fsync one event; returns it with its sequence number.
    pub fn append(&self, at: u64, event: Event) -> Result<LogEntry, StoreError> {
        let mut log = self.log.lock().expect("log lock");
        let entry = LogEntry {
            seq: log.next_seq,
            at,
            event,
        };
        let mut line = serde_json::to_string(&entry).expect("events serialize");
        line.push('\n');
        let path = self.dir.join(LOG_FILE);
        log.file.write_all(line.as_bytes()).map_err(io_err(&path))?;
        log.file.sync_data().map_err(io_err(&path))?;
        log.next_seq += 1;
        Ok(entry)
    }

    /// All acknowledged entries, in order.
    pub fn entries(&self) -> Result<Vec<LogEntry>, StoreError> {
        let _guard = self.log.lock().expect("log lock");
        read_log(&self.dir.join(LOG_FILE), false)
    }

    pub fn write_snapshot(&self, session: &Session, last_seq: u64) -> Result<(), StoreError> {
        let path = self.dir.join(SESSION_DIR).join(format!("{}.json", session.session_id));
        let snap = Snapshot {
            last_seq,
            session: session.clone(),
        };
        write_atomic(&path, serde_json::to_string_pretty(&snap).expect("snapshot serializes").as_bytes())
    }

    pub fn save_model(&self, name: &str, model: &BeliefModel) -> Result<String, StoreError> {
        let model_ref = format!("{MODEL_DIR}/{name}.json");
        let path = self.dir.join(&model_ref);
        write_atomic(&path, serde_json::to_string_pretty(model).expect("model serializes").as_bytes())?;
        Ok(model_ref)
    }

    pub fn load_model(&self, model_ref: &str) -> Result<Option<BeliefModel>, StoreError> {
        let path = self.dir.join(model_ref);
        match fs::read_to_string(&path) {
            Ok(raw) => serde_json::from_str(&raw).map(Some).map_err(|e| StoreError::Format {
                path,
                message: e.to_string(),
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path)(e)),
        }
    }
}

/// Write through a temp file in the same directory, then rename and sync.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| io_err(path)(e.error))?;
    if let Ok(d) = File::open(dir) {
        // directory fsync is best effort; not every platform supports it
        let _ = d.sync_all();
    }
    Ok(())
}

/// Parse the log. With `repair`, a torn final line is truncated away;
/// without it, the torn line is skipped.
fn read_log(path: &Path, repair: bool) -> Result<Vec<LogEntry>, StoreError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut reader = BufReader::new(file);
    let mut entries = Vec::new();
    let mut valid_len = 0u64;
    let mut line_no = 0;
    let mut buf = String::new();
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf).map_err(io_err(path))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let complete = buf.ends_with('\n');
        match serde_json::from_str::<LogEntry>(buf.trim_end()) {
            Ok(entry) if complete => {
                if entries.last().is_some_and(|e: &LogEntry| e.seq >= entry.seq) {
                    return Err(StoreError::Corrupt {
                        path: path.to_path_buf(),
                        line: line_no,
                        message: format!("sequence {} is not increasing", entry.seq),
                    });
                }
                valid_len += n as u64;
                entries.push(entry);
            }
            result => {
                let mut rest = String::new();
                reader.read_line(&mut rest).map_err(io_err(path))?;
                if !rest.is_empty() {
                    let message = match result {
                        Err(e) => e.to_string(),
                        Ok(_) => "missing newline".into(),
                    };
                    return Err(StoreError::Corrupt {
                        path: path.to_path_buf(),
                        line: line_no,
                        message,
                    });
                }
                warn!("{}:{line_no}: dropping torn final log line", path.display());
                if repair {
                    let f = OpenOptions::new().write(true).open(path).map_err(io_err(path))?;
                    f.set_len(valid_len).map_err(io_err(path))?;
                    f.sync_all().map_err(io_err(path))?;
                }
                break;
            }
        }
    }
    Ok(entries)
}

fn recover_sessions(dir: &Path, entries: &[LogEntry]) -> Result<BTreeMap<String, (Session, u64)>, StoreError> {
    let mut sessions: BTreeMap<String, (Session, u64)> = BTreeMap::new();
    let snap_dir = dir.join(SESSION_DIR);
    for item in fs::read_dir(&snap_dir).map_err(io_err(&snap_dir))? {
        let path = item.map_err(io_err(&snap_dir))?.path();
        if path.extension().is_none_or(|e| e != "json") {
            continue;
        }
        let raw = fs::read_to_string(&path).map_err(io_err(&path))?;
        let snap: Snapshot = serde_json::from_str(&raw).map_err(|e| StoreError::Format {
            path: path.clone(),
            message: e.to_string(),
        })?;
        sessions.insert(snap.session.session_id.clone(), (snap.session, snap.last_seq));
    }
    // a snapshot newer than the log cannot be trusted
    let last_logged = entries.last().map_or(0, |e| e.seq);
    sessions.retain(|id, (_, seq)| {
        let keep = *seq <= last_logged;
        if !keep {
            warn!("snapshot of {id} is ahead of the log; rebuilding from events");
        }
        keep
    });
    for e in entries {
        let id = e.event.session_id();
        if let Event::SessionCreated { session } = &e.event {
            sessions.entry(id.to_string()).or_insert_with(|| (session.clone(), e.seq));
            continue;
        }
        let (session, last) = sessions.get_mut(id).ok_or_else(|| StoreError::Orphan {
            seq: e.seq,
            session_id: id.to_string(),
        })?;
        if e.seq > *last {
            e.event.apply(session, e.at).map_err(|source| StoreError::Replay { seq: e.seq, source })?;
            *last = e.seq;
        }
    }
    Ok(sessions)
}
