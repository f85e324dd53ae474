use std::fmt;
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use provcube_core::cube::OutputFormat;
use provcube_core::graph::ProcessGraph;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Created,
    Queued,
    Running,
    Finished,
    Error,
}

impl JobStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            JobStatus::Created => "created",
            JobStatus::Queued => "queued",
            JobStatus::Running => "running",
            JobStatus::Finished => "finished",
            JobStatus::Error => "error",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Finished | JobStatus::Error)
    }

    /// The only moves a job may make.
    pub fn can_become(self, next: JobStatus) -> bool {
        use JobStatus::*;
        matches!(
            (self, next),
            (Created, Queued) | (Queued, Running) | (Running, Finished) | (Running, Error)
        )
    }
}

impl fmt::Display for JobStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogLevel {
    Info,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    pub time: DateTime<Utc>,
    pub level: LogLevel,
    pub message: String,
}

/// A file produced by a job, relative to the service data directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultAsset {
    pub name: String,
    pub path: String,
    pub format: OutputFormat,
}

#[derive(Debug, Clone)]
pub struct Job {
    pub id: String,
    pub graph: ProcessGraph,
    pub status: JobStatus,
    /// Every status the job has held, oldest first.
    pub history: Vec<JobStatus>,
    pub created_at: DateTime<Utc>,
    pub started_at: Option<DateTime<Utc>>,
    pub finished_at: Option<DateTime<Utc>>,
    pub results: Vec<ResultAsset>,
    pub logs: Vec<LogLine>,
    pub error: Option<String>,
    pub bbox: Option<[f64; 4]>,
    /// Data-dir-relative path of the run's PROV-JSON, once written.
    pub provenance: Option<String>,
}

impl Job {
    pub fn new(id: String, graph: ProcessGraph, bbox: Option<[f64; 4]>, now: DateTime<Utc>) -> Self {
        Job {
            id,
            graph,
            status: JobStatus::Created,
            history: vec![JobStatus::Created],
            created_at: now,
            started_at: None,
            finished_at: None,
            results: Vec::new(),
            logs: Vec::new(),
            error: None,
            bbox,
            provenance: None,
        }
    }

    /// Compare-and-set on the status. Returns false, changing nothing, when
    /// the job is not in `from` or the move is not allowed.
    pub fn transition(&mut self, from: JobStatus, to: JobStatus, now: DateTime<Utc>) -> bool {
        if self.status != from || !from.can_become(to) {
            return false;
        }
        self.status = to;
        self.history.push(to);
        match to {
            JobStatus::Running => self.started_at = Some(now.max(self.created_at)),
            JobStatus::Finished | JobStatus::Error => {
                let floor = self.started_at.unwrap_or(self.created_at);
                self.finished_at = Some(now.max(floor));
            }
            _ => {}
        }
        true
    }

    pub fn log(&mut self, level: LogLevel, message: impl Into<String>, now: DateTime<Utc>) {
        let time = self.logs.last().map_or(now, |l| now.max(l.time));
        self.logs.push(LogLine {
            time,
            level,
            message: message.into(),
        });
    }

    pub fn snapshot(&self) -> JobSnapshot {
        JobSnapshot {
            id: self.id.clone(),
            status: self.status,
            created_at: self.created_at,
            started_at: self.started_at,
            finished_at: self.finished_at,
            error: self.error.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobSnapshot {
    pub id: String,
    pub status: JobStatus,
    pub created_at: DateTime<Utc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub started_at: Option<DateTime<Utc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<DateTime<Utc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Where a job writes its files, relative to the data directory.
pub fn job_dir(id: &str) -> PathBuf {
    PathBuf::from("jobs").join(id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use JobStatus::*;

    const ALL: [JobStatus; 5] = [Created, Queued, Running, Finished, Error];

    #[test]
    fn allowed_moves() {
        let allowed: Vec<_> = ALL
            .iter()
            .flat_map(|a| ALL.iter().map(move |b| (*a, *b)))
            .filter(|(a, b)| a.can_become(*b))
            .collect();
        assert_eq!(
            allowed,
            [(Created, Queued), (Queued, Running), (Running, Finished), (Running, Error)]
        );
    }

    #[test]
    fn compare_and_set() {
        let graph = provcube_core::graph::parse_value(&serde_json::json!({
            "a": {"process_id": "add", "arguments": {"x": 1, "y": 2}, "result": true}
        }))
        .unwrap();
        let t0 = Utc::now();
        let mut job = Job::new("j".into(), graph, None, t0);
        assert!(!job.transition(Queued, Running, t0));
        assert!(job.transition(Created, Queued, t0));
        assert!(!job.transition(Created, Queued, t0));
        assert!(job.transition(Queued, Running, t0));
        assert!(job.transition(Running, Finished, t0));
        assert!(!job.transition(Running, Error, t0));
        assert_eq!(job.history, [Created, Queued, Running, Finished]);
        let s = job.snapshot();
        assert!(s.created_at <= s.started_at.unwrap() && s.started_at <= s.finished_at);
    }
}
