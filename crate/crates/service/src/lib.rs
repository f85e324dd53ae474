//! A simulated openEO back-end.
//!
//! Jobs are submitted as process graphs, started explicitly, executed by a
//! worker pool with a fresh provenance recorder each, and expose their
//! results as signed download links with STAC items and the run's
//! PROV-JSON alongside.

pub mod config;
pub mod http;
pub mod job;
pub mod journal;
mod service;
pub mod signing;
pub mod stac;

pub use config::{ConfigError, ServiceConfig};
pub use job::{JobSnapshot, JobStatus, LogLevel, LogLine, ResultAsset};
pub use service::{
    JobInfo, JobResults, JobService, ServiceError, DEFAULT_RESULT_FILE, INTERRUPTED, JOURNAL_FILE, PROVENANCE_FILE,
};
pub use signing::{sign_url, sign_url_at, verify_signed_url, SignedUrl};
