//! Process graphs: the declarative workflow description.
//!
//! A process graph maps node ids to [`ProcessNode`]s. Nodes reference each
//! other through `{"from_node": ..}` arguments, read callable parameters
//! through `{"from_parameter": ..}`, and carry nested callables (reducers,
//! appliers) as `{"process_graph": {..}}`.

mod dag;
mod parse;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde_json::Value as Json;
use thiserror::Error;

pub use dag::{build_dag, Dag, DagEdge};
pub use parse::{parse_process_graph, parse_value, MAX_NESTING_DEPTH};
pub(crate) use validate::ancestors_of_result;
pub use validate::{validate, Finding, FindingKind, Severity, Signatures, ValidationReport};

/// A parsed (sub-)graph. Immutable once constructed by the parser.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessGraph {
    pub nodes: BTreeMap<String, ProcessNode>,
    pub result_node: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessNode {
    pub process_id: String,
    pub arguments: BTreeMap<String, Argument>,
    pub result: bool,
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Argument {
    Literal(Json),
    NodeRef(String),
    ParameterRef(String),
    ChildGraph(ProcessGraph),
}

impl ProcessGraph {
    pub fn result(&self) -> &ProcessNode {
        &self.nodes[&self.result_node]
    }

    /// `(argument name, referenced node)` pairs of one node, in argument order.
    pub fn node_refs<'a>(&'a self, node_id: &str) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        self.nodes
            .get(node_id)
            .into_iter()
            .flat_map(|node| node.arguments.iter())
            .filter_map(|(name, arg)| match arg {
                Argument::NodeRef(target) => Some((name.as_str(), target.as_str())),
                _ => None,
            })
    }

    /// Number of top-level `from_node` arguments.
    pub fn node_ref_count(&self) -> usize {
        self.nodes
            .values()
            .flat_map(|n| n.arguments.values())
            .filter(|a| matches!(a, Argument::NodeRef(_)))
            .count()
    }

    /// Serialize back to the process-graph wire shape.
    pub fn to_json(&self) -> Json {
        let nodes = self
            .nodes
            .iter()
            .map(|(id, node)| (id.clone(), node.to_json()))
            .collect::<serde_json::Map<_, _>>();
        Json::Object(nodes)
    }
}

impl ProcessNode {
    fn to_json(&self) -> Json {
        let mut obj = serde_json::Map::new();
        obj.insert("process_id".into(), Json::String(self.process_id.clone()));
        let args = self
            .arguments
            .iter()
            .map(|(k, v)| (k.clone(), v.to_json()))
            .collect::<serde_json::Map<_, _>>();
        obj.insert("arguments".into(), Json::Object(args));
        if self.result {
            obj.insert("result".into(), Json::Bool(true));
        }
        if let Some(d) = &self.description {
            obj.insert("description".into(), Json::String(d.clone()));
        }
        Json::Object(obj)
    }

    pub fn argument(&self, name: &str) -> Option<&Argument> {
        self.arguments.get(name)
    }
}

impl Argument {
    pub fn to_json(&self) -> Json {
        match self {
            Argument::Literal(v) => v.clone(),
            Argument::NodeRef(id) => serde_json::json!({ "from_node": id }),
            Argument::ParameterRef(name) => serde_json::json!({ "from_parameter": name }),
            Argument::ChildGraph(g) => serde_json::json!({ "process_graph": g.to_json() }),
        }
    }
}

/// Location of a (sub-)graph: node ids and argument names from the root.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GraphPath(pub Vec<String>);

impl GraphPath {
    pub fn child(&self, node: &str, argument: &str) -> GraphPath {
        let mut segments = self.0.clone();
        segments.push(node.to_string());
        segments.push(argument.to_string());
        GraphPath(segments)
    }

    pub fn depth(&self) -> usize {
        self.0.len() / 2
    }
}

impl fmt::Display for GraphPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            f.write_str("/")
        } else {
            for seg in &self.0 {
                write!(f, "/{seg}")?;
            }
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("malformed process graph at {path}: {reason}")]
    MalformedDocument { path: GraphPath, reason: String },
    #[error("node {node:?} at {path} has no process_id")]
    MissingProcessId { path: GraphPath, node: String },
    #[error("graph at {path} has {count} result nodes, expected exactly one")]
    ResultCountError { path: GraphPath, count: usize },
    #[error("node {node:?} at {path} references unknown node {target:?}")]
    DanglingReference {
        path: GraphPath,
        node: String,
        target: String,
    },
    #[error("cycle detected at {path}: {}", cycle.join(" -> "))]
    CycleDetected { path: GraphPath, cycle: Vec<String> },
}
