use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;

use chrono::Utc;
use provcube_core::cube::{to_cube_json, OutputFormat};
use provcube_core::engine::{
    load_extent, run_recorded, EngineSettings, ProcessRegistry, TaskHooks, Value, DEFAULT_WORKFLOW_NAME,
};
use provcube_core::graph::{parse_value, validate, ProcessGraph};
use provcube_core::prov::{to_prov_json, ActivityStatus, ProvError, ProvRecorder, ValueDescriptor};
use serde::Serialize;
use serde_json::Value as Json;
use thiserror::Error;

use crate::config::ServiceConfig;
use crate::job::{job_dir, Job, JobSnapshot, JobStatus, LogLevel, LogLine, ResultAsset};
use crate::journal::{read_events, AssetRecord, Event, Journal};
use crate::signing::{sign_url, verify_parts};
use crate::stac::make_stac_item;

pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const PROVENANCE_FILE: &str = "provenance.json";
pub const DEFAULT_RESULT_FILE: &str = "result.json";
pub const INTERRUPTED: &str = "interrupted";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ServiceError {
    #[error("job {0} not found")]
    NotFound(String),
    #[error("invalid process graph: {message}")]
    InvalidGraph { message: String, findings: Vec<String> },
    #[error("job {id} cannot move from {from} to {to}")]
    InvalidTransition { id: String, from: JobStatus, to: JobStatus },
    #[error("job {id} is {status}, results are not available yet")]
    NotFinished { id: String, status: JobStatus },
    #[error("invalid or expired download link")]
    Forbidden,
    #[error("i/o failure: {0}")]
    Io(String),
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Io(e.to_string())
    }
}

/// What `GET /jobs/{id}` reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobInfo {
    #[serde(flatten)]
    pub job: JobSnapshot,
    /// Present once a run has been recorded, including failed runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance_href: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobResults {
    pub assets: Vec<String>,
    pub stac_items: Vec<Json>,
    pub provenance_href: String,
}

struct Inner {
    config: ServiceConfig,
    registry: ProcessRegistry,
    jobs: Mutex<HashMap<String, Job>>,
    queue: Mutex<VecDeque<String>>,
    ready: Condvar,
    stop: AtomicBool,
    journal: Option<Journal>,
    workers: Mutex<Vec<JoinHandle<()>>>,
}

/// The simulated back-end. Cheap to clone; clones share one job store.
#[derive(Clone)]
pub struct JobService {
    inner: Arc<Inner>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl JobService {
    /// Create the data directory, replay the journal, start the workers.
    pub fn open(config: ServiceConfig) -> Result<Self, ServiceError> {
        std::fs::create_dir_all(&config.data_dir)?;
        let journal_path = config.data_dir.join(JOURNAL_FILE);
        let (jobs, interrupted) = if config.journal {
            replay(&read_events(&journal_path)?)
        } else {
            (HashMap::new(), Vec::new())
        };
        let journal = if config.journal {
            Some(Journal::open(&journal_path)?)
        } else {
            None
        };
        let workers = config.workers;
        let service = JobService {
            inner: Arc::new(Inner {
                config,
                registry: ProcessRegistry::with_builtins(),
                jobs: Mutex::new(jobs),
                queue: Mutex::new(VecDeque::new()),
                ready: Condvar::new(),
                stop: AtomicBool::new(false),
                journal,
                workers: Mutex::new(Vec::new()),
            }),
        };
        for (id, was_queued) in interrupted {
            let time = Utc::now();
            if was_queued {
                service.record(&Event::Status {
                    id: id.clone(),
                    time,
                    status: JobStatus::Running,
                    error: None,
                });
            }
            service.record(&Event::Status {
                id,
                time,
                status: JobStatus::Error,
                error: Some(INTERRUPTED.into()),
            });
        }
        for _ in 0..workers {
            let worker = service.clone();
            let handle = std::thread::spawn(move || worker.worker_loop());
            lock(&service.inner.workers).push(handle);
        }
        Ok(service)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    fn record(&self, event: &Event) {
        if let Some(j) = &self.inner.journal {
            if let Err(e) = j.append(event) {
                tracing::warn!("journal write to {} failed: {e}", j.path().display());
            }
        }
    }

    fn sign(&self, path: &str) -> String {
        sign_url(path, self.inner.config.url_ttl, &self.inner.config.secret).to_string()
    }

    /// Parse and validate a submitted graph and store it as a new job.
    pub fn create_job(&self, body: &[u8]) -> Result<String, ServiceError> {
        let invalid = |message: String| ServiceError::InvalidGraph {
            findings: vec![message.clone()],
            message,
        };
        let doc: Json = serde_json::from_slice(body).map_err(|e| invalid(format!("body is not JSON: {e}")))?;
        // openEO clients wrap the graph as {"process": {"process_graph": ..}}
        let doc = match doc.get("process") {
            Some(p) if p.get("process_graph").is_some() && doc.get("process_id").is_none() => p.clone(),
            _ => doc,
        };
        let graph = parse_value(&doc).map_err(|e| invalid(e.to_string()))?;
        let report = validate(&graph, &self.inner.registry.signatures());
        if !report.is_valid() {
            let findings: Vec<String> = report.errors().map(|f| f.to_string()).collect();
            return Err(ServiceError::InvalidGraph {
                message: format!("{} validation error(s)", findings.len()),
                findings,
            });
        }
        let id = uuid::Uuid::new_v4().simple().to_string();
        let now = Utc::now();
        self.record(&Event::Created {
            id: id.clone(),
            time: now,
            graph: graph.to_json(),
        });
        let bbox = load_extent(&graph).map(|e| e.bbox());
        lock(&self.inner.jobs).insert(id.clone(), Job::new(id.clone(), graph, bbox, now));
        Ok(id)
    }

    fn with_job<T>(&self, id: &str, f: impl FnOnce(&mut Job) -> T) -> Result<T, ServiceError> {
        let mut jobs = lock(&self.inner.jobs);
        let job = jobs.get_mut(id).ok_or_else(|| ServiceError::NotFound(id.to_string()))?;
        Ok(f(job))
    }

    /// Compare-and-set a status, journaling the move.
    fn transition(&self, id: &str, from: JobStatus, to: JobStatus, error: Option<String>) -> Result<(), ServiceError> {
        let now = Utc::now();
        let mut jobs = lock(&self.inner.jobs);
        let job = jobs.get_mut(id).ok_or_else(|| ServiceError::NotFound(id.to_string()))?;
        if !job.transition(from, to, now) {
            return Err(ServiceError::InvalidTransition {
                id: id.to_string(),
                from: job.status,
                to,
            });
        }
        if error.is_some() {
            job.error = error.clone();
        }
        // journal under the job lock so file order matches status order
        self.record(&Event::Status {
            id: id.to_string(),
            time: now,
            status: to,
            error,
        });
        Ok(())
    }

    /// Queue a created job for execution.
    pub fn start_job(&self, id: &str) -> Result<(), ServiceError> {
        self.transition(id, JobStatus::Created, JobStatus::Queued, None)?;
        lock(&self.inner.queue).push_back(id.to_string());
        self.inner.ready.notify_one();
        Ok(())
    }

    pub fn get_job(&self, id: &str) -> Result<JobInfo, ServiceError> {
        let (job, prov) = self.with_job(id, |j| (j.snapshot(), j.provenance.clone()))?;
        Ok(JobInfo {
            job,
            provenance_href: prov.map(|p| self.sign(&p)),
        })
    }

    /// Every status the job has held, oldest first.
    pub fn status_history(&self, id: &str) -> Result<Vec<JobStatus>, ServiceError> {
        self.with_job(id, |j| j.history.clone())
    }

    pub fn get_logs(&self, id: &str) -> Result<Vec<LogLine>, ServiceError> {
        self.with_job(id, |j| j.logs.clone())
    }

    /// Signed links to every result, one STAC item per asset, and the
    /// provenance document.
    pub fn list_results(&self, id: &str) -> Result<JobResults, ServiceError> {
        let job = self.with_job(id, |j| j.clone())?;
        if job.status != JobStatus::Finished {
            return Err(ServiceError::NotFinished {
                id: id.to_string(),
                status: job.status,
            });
        }
        let provenance_href = self.sign(job.provenance.as_deref().unwrap_or_default());
        let finished = job.finished_at.unwrap_or(job.created_at);
        let mut assets = Vec::new();
        let mut stac_items = Vec::new();
        for a in &job.results {
            let href = self.sign(&a.path);
            stac_items.push(make_stac_item(&job.id, a, &href, job.bbox, finished, &provenance_href));
            assets.push(href);
        }
        Ok(JobResults {
            assets,
            stac_items,
            provenance_href,
        })
    }

    /// Check a download link and map it to a file under the data directory.
    pub fn resolve_download(&self, path: &str, expires: &str, sig: &str, now: u64) -> Result<(PathBuf, &'static str), ServiceError> {
        if !verify_parts(path, expires, sig, &self.inner.config.secret, now) {
            return Err(ServiceError::Forbidden);
        }
        let rel = Path::new(path);
        if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
            return Err(ServiceError::Forbidden);
        }
        let media = match rel.extension().and_then(|e| e.to_str()) {
            Some("csv") => OutputFormat::Csv.media_type(),
            _ => "application/json",
        };
        Ok((self.inner.config.data_dir.join(rel), media))
    }

    /// Run the oldest queued job on the calling thread. Returns its id, or
    /// `None` when nothing is queued.
    pub fn process_next_queued(&self) -> Option<String> {
        let id = lock(&self.inner.queue).pop_front()?;
        self.execute(&id);
        Some(id)
    }

    fn worker_loop(&self) {
        loop {
            let id = {
                let mut q = lock(&self.inner.queue);
                loop {
                    if self.inner.stop.load(Ordering::SeqCst) {
                        return;
                    }
                    if let Some(id) = q.pop_front() {
                        break id;
                    }
                    q = self.inner.ready.wait(q).unwrap_or_else(|e| e.into_inner());
                }
            };
            self.execute(&id);
        }
    }

    fn log(&self, id: &str, level: LogLevel, message: impl Into<String>) {
        let _ = self.with_job(id, |j| j.log(level, message, Utc::now()));
    }

    fn execute(&self, id: &str) {
        if self.transition(id, JobStatus::Queued, JobStatus::Running, None).is_err() {
            return;
        }
        let Ok(graph) = self.with_job(id, |j| j.graph.clone()) else {
            return;
        };
        let rel_dir = job_dir(id);
        let abs_dir = self.inner.config.data_dir.join(&rel_dir);
        let outcome = self.run_graph(id, &graph, &rel_dir, &abs_dir);
        match outcome {
            Ok((results, provenance)) => {
                self.record(&Event::Results {
                    id: id.to_string(),
                    assets: results
                        .iter()
                        .map(|a| AssetRecord {
                            name: a.name.clone(),
                            path: a.path.clone(),
                            format: a.format.name().to_string(),
                        })
                        .collect(),
                    provenance: Some(provenance.clone()),
                });
                let _ = self.with_job(id, |j| {
                    j.results = results;
                    j.provenance = Some(provenance);
                });
                self.log(id, LogLevel::Info, "job finished");
                let _ = self.transition(id, JobStatus::Running, JobStatus::Finished, None);
            }
            Err(message) => {
                self.log(id, LogLevel::Error, message.clone());
                let _ = self.transition(id, JobStatus::Running, JobStatus::Error, Some(message));
            }
        }
    }

    /// Execute under a fresh recorder and write results and provenance. On
    /// failure the partial provenance is still written.
    fn run_graph(
        &self,
        id: &str,
        graph: &ProcessGraph,
        rel_dir: &Path,
        abs_dir: &Path,
    ) -> Result<(Vec<ResultAsset>, String), String> {
        std::fs::create_dir_all(abs_dir).map_err(|e| format!("cannot create {}: {e}", abs_dir.display()))?;
        let settings = EngineSettings {
            grid_step: self.inner.config.grid_step,
            output_dir: abs_dir.to_path_buf(),
            confine_outputs: true,
            ..Default::default()
        };
        let recorder = ProvRecorder::new();
        let hooks = LoggingHooks {
            recorder: &recorder,
            service: self,
            job_id: id,
            nodes: Mutex::new(BTreeMap::new()),
        };
        let (result, doc) = run_recorded(graph, &self.inner.registry, &settings, &recorder, &hooks, DEFAULT_WORKFLOW_NAME);

        let prov_rel = rel_dir.join(PROVENANCE_FILE);
        let prov_written = to_prov_json(&doc)
            .map_err(|e| e.to_string())
            .and_then(|bytes| std::fs::write(abs_dir.join(PROVENANCE_FILE), bytes).map_err(|e| e.to_string()));
        let prov_rel = path_string(&prov_rel);
        if prov_written.is_ok() {
            let _ = self.with_job(id, |j| j.provenance = Some(prov_rel.clone()));
        }

        let outcome = result.map_err(|e| match e.node_id() {
            Some(node) => format!("node {node} failed: {e}"),
            None => format!("execution failed: {e}"),
        })?;
        prov_written.map_err(|e| format!("cannot write provenance: {e}"))?;

        let mut assets: Vec<ResultAsset> = outcome
            .assets
            .iter()
            .filter_map(|a| {
                let rel = a.path.strip_prefix(&self.inner.config.data_dir).ok()?;
                Some(ResultAsset {
                    name: a.path.file_name()?.to_string_lossy().into_owned(),
                    path: path_string(rel),
                    format: a.format,
                })
            })
            .collect();
        if assets.is_empty() {
            let bytes = match &outcome.value {
                Value::Cube(c) => to_cube_json(c),
                Value::Number(n) => serde_json::to_vec(n).unwrap_or_default(),
                Value::Array(a) => serde_json::to_vec(a).unwrap_or_default(),
                Value::Json(j) => serde_json::to_vec(j).unwrap_or_default(),
                Value::Asset(_) => Vec::new(),
            };
            std::fs::write(abs_dir.join(DEFAULT_RESULT_FILE), bytes).map_err(|e| format!("cannot write result: {e}"))?;
            assets.push(ResultAsset {
                name: DEFAULT_RESULT_FILE.into(),
                path: path_string(&rel_dir.join(DEFAULT_RESULT_FILE)),
                format: OutputFormat::CubeJson,
            });
        }
        Ok((assets, prov_rel))
    }

    /// Stop the workers and flush the journal. Jobs still running are not
    /// waited for; a restart reports them as interrupted.
    pub fn shutdown(&self) {
        self.inner.stop.store(true, Ordering::SeqCst);
        self.inner.ready.notify_all();
        let handles: Vec<_> = lock(&self.inner.workers).drain(..).collect();
        for h in handles {
            if h.is_finished() {
                let _ = h.join();
            }
        }
        if let Some(j) = &self.inner.journal {
            let _ = j.sync();
        }
    }
}

/// Forward-slash form, used in links on every platform.
fn path_string(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Rebuild the job table from journal events. Jobs that were queued or
/// running when the journal ends are returned as interrupted.
/// The flag is true for jobs that never left the queue.
fn replay(events: &[Event]) -> (HashMap<String, Job>, Vec<(String, bool)>) {
    let mut jobs: HashMap<String, Job> = HashMap::new();
    for e in events {
        match e {
            Event::Created { id, time, graph } => {
                if let Ok(g) = parse_value(graph) {
                    let bbox = load_extent(&g).map(|x| x.bbox());
                    jobs.insert(id.clone(), Job::new(id.clone(), g, bbox, *time));
                }
            }
            Event::Status { id, time, status, error } => {
                if let Some(j) = jobs.get_mut(id) {
                    let from = j.status;
                    if j.transition(from, *status, *time) && error.is_some() {
                        j.error = error.clone();
                    }
                }
            }
            Event::Results { id, assets, provenance } => {
                if let Some(j) = jobs.get_mut(id) {
                    j.results = assets
                        .iter()
                        .filter_map(|a| {
                            Some(ResultAsset {
                                name: a.name.clone(),
                                path: a.path.clone(),
                                format: OutputFormat::parse(&a.format)?,
                            })
                        })
                        .collect();
                    j.provenance = provenance.clone();
                }
            }
        }
    }
    let mut interrupted = Vec::new();
    let now = Utc::now();
    for j in jobs.values_mut() {
        if matches!(j.status, JobStatus::Queued | JobStatus::Running) {
            let was_queued = j.transition(JobStatus::Queued, JobStatus::Running, now);
            interrupted.push((j.id.clone(), was_queued));
            j.transition(JobStatus::Running, JobStatus::Error, now);
            j.error = Some(INTERRUPTED.into());
            j.log(LogLevel::Error, format!("job {INTERRUPTED} by service restart"), now);
        }
    }
    interrupted.sort();
    (jobs, interrupted)
}

/// Provenance hooks that also write node lifecycle lines to the job log.
struct LoggingHooks<'a> {
    recorder: &'a ProvRecorder,
    service: &'a JobService,
    job_id: &'a str,
    nodes: Mutex<BTreeMap<String, String>>,
}

impl TaskHooks for LoggingHooks<'_> {
    fn register_source(&self, descriptor: &ValueDescriptor) -> Result<String, ProvError> {
        self.recorder.register_source_entity(descriptor)
    }

    fn begin_task(
        &self,
        node_id: &str,
        process_id: &str,
        scope_path: &[String],
        input_entity_ids: &[String],
    ) -> Result<String, ProvError> {
        let activity = self.recorder.begin_task(node_id, process_id, scope_path, input_entity_ids)?;
        lock(&self.nodes).insert(activity.clone(), node_id.to_string());
        self.service
            .log(self.job_id, LogLevel::Info, format!("node started: {node_id} ({process_id})"));
        Ok(activity)
    }

    fn end_task(&self, activity_id: &str, status: ActivityStatus, outputs: &[ValueDescriptor]) -> Result<Vec<String>, ProvError> {
        let ids = self.recorder.end_task(activity_id, status, outputs)?;
        let node = lock(&self.nodes).get(activity_id).cloned().unwrap_or_default();
        let level = if status == ActivityStatus::Error { LogLevel::Error } else { LogLevel::Info };
        self.service
            .log(self.job_id, level, format!("node finished: {node} ({})", status.as_str()));
        Ok(ids)
    }
}
