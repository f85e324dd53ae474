//! W3C PROV documents for workflow runs.
//!
//! A run maps onto plain PROV vocabulary: the workflow is a root activity
//! associated with the engine agent, every executed process node is an
//! activity, and every value flowing between nodes is an entity.

mod dot;
mod json;
mod recorder;
mod stats;

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dot::to_dot;
pub use json::{from_prov_json, to_prov_json};
pub use recorder::{Clock, ProvRecorder};
pub use stats::{stats, ProvStats};

pub const PROV_NS: &str = "http://www.w3.org/ns/prov#";
pub const APP_NS: &str = "https://provcube.dev/ns#";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivityStatus {
    Pending,
    Finished,
    Error,
}

impl ActivityStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pending => "pending",
            Self::Finished => "finished",
            Self::Error => "error",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityRole {
    Source,
    Intermediate,
    Result,
}

impl EntityRole {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Source => "source",
            Self::Intermediate => "intermediate",
            Self::Result => "result",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Software,
    Person,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProvActivity {
    pub id: String,
    pub label: String,
    /// Source graph node; `None` for the workflow root.
    pub node_id: Option<String>,
    pub start_time: DateTime<Utc>,
    pub end_time: Option<DateTime<Utc>>,
    pub status: ActivityStatus,
    pub scope_path: Vec<String>,
    pub attributes: BTreeMap<String, String>,
}

impl ProvActivity {
    /// `end - start` in seconds; zero while pending.
    pub fn duration_s(&self) -> f64 {
        self.end_time
            .map(|end| (end - self.start_time).num_milliseconds() as f64 / 1000.0)
            .unwrap_or(0.0)
    }

    pub fn is_root(&self) -> bool {
        self.node_id.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProvEntity {
    pub id: String,
    pub label: Option<String>,
    pub role: EntityRole,
    pub value_type: String,
    pub dimensions_summary: Vec<String>,
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProvAgent {
    pub id: String,
    pub kind: AgentKind,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelationKind {
    #[serde(rename = "used")]
    Used,
    #[serde(rename = "wasGeneratedBy")]
    WasGeneratedBy,
    #[serde(rename = "wasAssociatedWith")]
    WasAssociatedWith,
    #[serde(rename = "wasInformedBy")]
    WasInformedBy,
    #[serde(rename = "wasDerivedFrom")]
    WasDerivedFrom,
}

impl RelationKind {
    pub const ALL: [RelationKind; 5] = [
        Self::Used,
        Self::WasGeneratedBy,
        Self::WasAssociatedWith,
        Self::WasInformedBy,
        Self::WasDerivedFrom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Used => "used",
            Self::WasGeneratedBy => "wasGeneratedBy",
            Self::WasAssociatedWith => "wasAssociatedWith",
            Self::WasInformedBy => "wasInformedBy",
            Self::WasDerivedFrom => "wasDerivedFrom",
        }
    }

    /// PROV-JSON role keys for (source, target).
    pub fn role_keys(self) -> (&'static str, &'static str) {
        match self {
            Self::Used => ("prov:activity", "prov:entity"),
            Self::WasGeneratedBy => ("prov:entity", "prov:activity"),
            Self::WasAssociatedWith => ("prov:activity", "prov:agent"),
            Self::WasInformedBy => ("prov:informed", "prov:informant"),
            Self::WasDerivedFrom => ("prov:generatedEntity", "prov:usedEntity"),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == name)
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub kind: RelationKind,
    pub source: String,
    pub target: String,
    pub time: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProvDocument {
    pub prefixes: BTreeMap<String, String>,
    pub workflow_activity: Option<String>,
    pub activities: BTreeMap<String, ProvActivity>,
    pub entities: BTreeMap<String, ProvEntity>,
    pub agents: BTreeMap<String, ProvAgent>,
    pub relations: Vec<Relation>,
}

impl ProvDocument {
    pub fn relations_of(&self, kind: RelationKind) -> impl Iterator<Item = &Relation> {
        self.relations.iter().filter(move |r| r.kind == kind)
    }

    pub fn tasks(&self) -> impl Iterator<Item = &ProvActivity> {
        self.activities.values().filter(|a| !a.is_root())
    }

    pub fn pending(&self) -> Option<&ProvActivity> {
        self.activities.values().find(|a| a.status == ActivityStatus::Pending)
    }

    /// Ids of relation endpoints that do not resolve to an element of the
    /// expected class.
    pub fn dangling_references(&self) -> Vec<String> {
        let mut missing = Vec::new();
        for r in &self.relations {
            let (src_ok, dst_ok) = match r.kind {
                RelationKind::Used => (self.activities.contains_key(&r.source), self.entities.contains_key(&r.target)),
                RelationKind::WasGeneratedBy => {
                    (self.entities.contains_key(&r.source), self.activities.contains_key(&r.target))
                }
                RelationKind::WasAssociatedWith => {
                    (self.activities.contains_key(&r.source), self.agents.contains_key(&r.target))
                }
                RelationKind::WasInformedBy => {
                    (self.activities.contains_key(&r.source), self.activities.contains_key(&r.target))
                }
                RelationKind::WasDerivedFrom => {
                    (self.entities.contains_key(&r.source), self.entities.contains_key(&r.target))
                }
            };
            if !src_ok {
                missing.push(r.source.clone());
            }
            if !dst_ok {
                missing.push(r.target.clone());
            }
        }
        missing
    }
}

/// What the recorder needs to know about a value to register it as an entity.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValueDescriptor {
    pub label: Option<String>,
    pub value_type: String,
    pub dimensions: Vec<String>,
    /// The value is the output of the graph's result node.
    pub result: bool,
    pub attributes: BTreeMap<String, String>,
}

impl ValueDescriptor {
    pub fn scalar() -> Self {
        ValueDescriptor {
            value_type: "scalar".into(),
            ..Default::default()
        }
    }

    pub fn datacube(dimensions: Vec<String>) -> Self {
        ValueDescriptor {
            value_type: "datacube".into(),
            dimensions,
            ..Default::default()
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProvError {
    #[error("invalid recorder state: {0}")]
    InvalidState(String),
    #[error("unknown entity {0:?}")]
    UnknownEntity(String),
    #[error("unknown activity {0:?}")]
    UnknownActivity(String),
    #[error("activity {0:?} already ended")]
    AlreadyEnded(String),
    #[error("activity {0:?} has not ended")]
    PendingActivity(String),
    #[error("malformed PROV-JSON: {0}")]
    Malformed(String),
}

/// ISO-8601 UTC with millisecond precision and a `Z` suffix.
pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string()
}
