//! Study exports derived from the event log.
//!
//! Everything here is a pure function of the log and the config hash, and
//! every collection is ordered, so repeated exports are byte-identical.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use selex_core::study::{compute_metrics, Decision, MetricsReport, Session};
use serde::Serialize;
use tempfile::NamedTempFile;
use thiserror::Error;

use crate::store::{Event, LogEntry};

pub const DECISIONS_FILE: &str = "decisions.csv";
pub const SURVEYS_FILE: &str = "surveys.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const INPUT_RECORDS_FILE: &str = "input_records.jsonl";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExportBundle {
    pub decisions_csv: String,
    pub surveys_csv: String,
    pub metrics_json: String,
    pub input_records_jsonl: String,
}

#[derive(Debug, Serialize)]
struct ConditionMetrics {
    n_sessions: usize,
    /// Sessions that reached the survey.
    n_complete: usize,
    /// Mean time from entering the task phase to the last decision.
    mean_task_phase_ms: Option<f64>,
    report: Option<MetricsReport>,
}

#[derive(Debug, Serialize)]
struct MetricsFile {
    config_hash: String,
    by_condition: BTreeMap<String, ConditionMetrics>,
    by_session: BTreeMap<String, MetricsReport>,
}

fn replay(entries: &[LogEntry]) -> BTreeMap<String, Session> {
    let mut sessions = BTreeMap::new();
    for e in entries {
        match &e.event {
            Event::SessionCreated { session } => {
                sessions.insert(session.session_id.clone(), session.clone());
            }
            other => {
                if let Some(s) = sessions.get_mut(other.session_id()) {
                    // the log only holds events that applied cleanly
                    let _ = other.apply(s, e.at);
                }
            }
        }
    }
    sessions
}

pub fn build_bundle(entries: &[LogEntry], config_hash: &str) -> ExportBundle {
    let sessions = replay(entries);
    let condition_of = |id: &str| {
        sessions
            .get(id)
            .map(|s| (s.condition.name.as_str().to_string(), s.condition.sampling.to_string()))
            .unwrap_or_default()
    };

    let mut decisions: Vec<(&str, u64, &Decision)> = Vec::new();
    let mut surveys = Vec::new();
    let mut records = Vec::new();
    for e in entries {
        match &e.event {
            Event::DecisionRecorded { decision } => decisions.push((&decision.session_id, e.seq, decision)),
            Event::SurveySubmitted { response } => surveys.push((e.seq, response)),
            Event::InputSubmitted { records: r, .. } => records.extend(r.iter().map(|rec| (e.seq, rec))),
            _ => {}
        }
    }
    decisions.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    surveys.sort_by(|a, b| (&a.1.session_id, a.0).cmp(&(&b.1.session_id, b.0)));

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "config_hash", "session_id", "condition", "sampling", "doc_id", "ai_label", "human_label", "groundtruth",
        "elapsed_ms",
    ])
    .expect("in-memory write");
    for (_, _, d) in &decisions {
        let (condition, sampling) = condition_of(&d.session_id);
        w.write_record([
            config_hash,
            &d.session_id,
            &condition,
            &sampling,
            &d.doc_id,
            d.ai_label.as_str(),
            d.human_label.as_str(),
            d.groundtruth.as_str(),
            &d.elapsed_ms.to_string(),
        ])
        .expect("in-memory write");
    }
    let decisions_csv = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["config_hash", "session_id", "condition", "sampling"];
    header.extend(selex_core::study::SURVEY_ITEMS.iter().map(|i| i.key));
    header.extend(["workload", "demographics", "submitted_at"]);
    w.write_record(&header).expect("in-memory write");
    for (_, r) in &surveys {
        let (condition, sampling) = condition_of(&r.session_id);
        let mut row = vec![config_hash.to_string(), r.session_id.clone(), condition, sampling];
        row.extend(r.ratings.entries().iter().map(|(_, v)| v.to_string()));
        row.push(format!("{:.4}", r.ratings.workload()));
        row.push(serde_json::to_string(&r.demographics).expect("map serializes"));
        row.push(r.submitted_at.to_string());
        w.write_record(&row).expect("in-memory write");
    }
    let surveys_csv = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");

    let mut by_condition_decisions: BTreeMap<String, Vec<Decision>> = BTreeMap::new();
    let mut by_session: BTreeMap<String, Vec<Decision>> = BTreeMap::new();
    for (_, _, d) in &decisions {
        let key = sessions.get(&d.session_id).map(|s| s.condition.to_string()).unwrap_or_default();
        by_condition_decisions.entry(key).or_default().push((*d).clone());
        by_session.entry(d.session_id.clone()).or_default().push((*d).clone());
    }
    let mut by_condition: BTreeMap<String, ConditionMetrics> = BTreeMap::new();
    for s in sessions.values() {
        let c = by_condition.entry(s.condition.to_string()).or_insert(ConditionMetrics {
            n_sessions: 0,
            n_complete: 0,
            mean_task_phase_ms: None,
            report: None,
        });
        c.n_sessions += 1;
    }
    for (key, c) in by_condition.iter_mut() {
        let times: Vec<f64> = sessions
            .values()
            .filter(|s| &s.condition.to_string() == key)
            .filter_map(|s| s.task_phase_ms())
            .map(|t| t as f64)
            .collect();
        c.n_complete = times.len();
        c.mean_task_phase_ms = (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64);
        c.report = by_condition_decisions.get(key).and_then(|d| compute_metrics(d).ok());
    }
    let metrics = MetricsFile {
        config_hash: config_hash.to_string(),
        by_condition,
        by_session: by_session
            .into_iter()
            .filter_map(|(id, d)| compute_metrics(&d).ok().map(|m| (id, m)))
            .collect(),
    };
    let metrics_json = serde_json::to_string_pretty(&metrics).expect("metrics serialize") + "\n";

    let mut input_records_jsonl = String::new();
    for (_, r) in &records {
        input_records_jsonl.push_str(&serde_json::to_string(r).expect("record serializes"));
        input_records_jsonl.push('\n');
    }

    ExportBundle {
        decisions_csv,
        surveys_csv,
        metrics_json,
        input_records_jsonl,
    }
}

impl ExportBundle {
    pub fn files(&self) -> [(&'static str, &str); 4] {
        [
            (DECISIONS_FILE, &self.decisions_csv),
            (SURVEYS_FILE, &self.surveys_csv),
            (METRICS_FILE, &self.metrics_json),
            (INPUT_RECORDS_FILE, &self.input_records_jsonl),
        ]
    }

    /// Write all files or none: everything is staged in temp files first.
    pub fn write_to(&self, dir: &Path) -> Result<(), ExportError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| ExportError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let mut staged = Vec::new();
        for (name, content) in self.files() {
            let mut tmp = NamedTempFile::new_in(dir).map_err(io(dir))?;
            tmp.write_all(content.as_bytes()).map_err(io(tmp.path()))?;
            tmp.as_file().sync_all().map_err(io(tmp.path()))?;
            staged.push((tmp, dir.join(name)));
        }
        for (tmp, target) in staged {
            tmp.persist(&target).map_err(|e| ExportError::Io {
                path: target.clone(),
                source: e.error,
            })?;
        }
        Ok(())
    }
}
