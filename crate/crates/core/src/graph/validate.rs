use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{Argument, GraphPath, ProcessGraph};

/// process_id → names of required arguments.
pub type Signatures = BTreeMap<String, Vec<String>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FindingKind {
    UnknownProcess(String),
    MissingArgument(String),
    UnreachableNode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub path: GraphPath,
    pub node_id: String,
    pub kind: FindingKind,
}

impl Finding {
    pub fn severity(&self) -> Severity {
        match self.kind {
            FindingKind::UnreachableNode => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity() {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        match &self.kind {
            FindingKind::UnknownProcess(p) => {
                write!(f, "{level}: {}{}: unknown process {p:?}", self.path, self.node_id)
            }
            FindingKind::MissingArgument(a) => write!(
                f,
                "{level}: {}{}: missing required argument {a:?}",
                self.path, self.node_id
            ),
            FindingKind::UnreachableNode => {
                write!(f, "{level}: {}{}: node does not contribute to the result", self.path, self.node_id)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    /// True when no error-level findings exist; warnings are tolerated.
    pub fn is_valid(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity() == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity() == Severity::Warning)
    }
}

/// Check a parsed graph against the process signatures of a registry.
pub fn validate(graph: &ProcessGraph, signatures: &Signatures) -> ValidationReport {
    let mut report = ValidationReport::default();
    validate_scope(graph, signatures, &GraphPath::default(), &mut report);
    report
}

fn validate_scope(graph: &ProcessGraph, signatures: &Signatures, path: &GraphPath, report: &mut ValidationReport) {
    let reachable = ancestors_of_result(graph);
    for (id, node) in &graph.nodes {
        let finding = |kind| Finding {
            path: path.clone(),
            node_id: id.clone(),
            kind,
        };
        match signatures.get(&node.process_id) {
            None => report
                .findings
                .push(finding(FindingKind::UnknownProcess(node.process_id.clone()))),
            Some(required) => {
                for arg in required {
                    if !node.arguments.contains_key(arg) {
                        report.findings.push(finding(FindingKind::MissingArgument(arg.clone())));
                    }
                }
            }
        }
        if !reachable.contains(id.as_str()) {
            report.findings.push(finding(FindingKind::UnreachableNode));
        }
        for (name, arg) in &node.arguments {
            if let Argument::ChildGraph(child) = arg {
                validate_scope(child, signatures, &path.child(id, name), report);
            }
        }
    }
}

/// Nodes with a path to the result node, the result node included.
pub(crate) fn ancestors_of_result(graph: &ProcessGraph) -> BTreeSet<&str> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![graph.result_node.as_str()];
    while let Some(id) = stack.pop() {
        if seen.insert(id) {
            stack.extend(graph.node_refs(id).map(|(_, t)| t));
        }
    }
    seen
}
