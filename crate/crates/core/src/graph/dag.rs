use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use super::{GraphError, GraphPath, ProcessGraph};

/// One `from_node` reference: data flows from `from` into `to.argument`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DagEdge {
    pub from: String,
    pub to: String,
    pub argument: String,
}

/// Top-level dependency structure of a process graph. Child graphs are not
/// flattened into it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    pub nodes: Vec<String>,
    pub edges: Vec<DagEdge>,
    pub topo_order: Vec<String>,
}

impl Dag {
    pub fn predecessors<'a>(&'a self, node: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges.iter().filter(move |e| e.to == node).map(|e| e.from.as_str())
    }

    pub fn position(&self, node: &str) -> Option<usize> {
        self.topo_order.iter().position(|n| n == node)
    }
}

/// Build the top-level DAG with a lexicographically-least topological order.
pub fn build_dag(graph: &ProcessGraph) -> Result<Dag, GraphError> {
    let nodes: Vec<String> = graph.nodes.keys().cloned().collect();
    let mut edges = Vec::new();
    for id in &nodes {
        for (arg, target) in graph.node_refs(id) {
            edges.push(DagEdge {
                from: target.to_string(),
                to: id.clone(),
                argument: arg.to_string(),
            });
        }
    }
    edges.sort();

    let mut indegree: BTreeMap<&str, usize> = nodes.iter().map(|n| (n.as_str(), 0)).collect();
    let mut successors: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in &edges {
        *indegree.get_mut(e.to.as_str()).expect("parsed graph") += 1;
        successors.entry(e.from.as_str()).or_default().push(e.to.as_str());
    }

    let mut ready: BinaryHeap<Reverse<&str>> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(n, _)| Reverse(*n))
        .collect();
    let mut topo_order = Vec::with_capacity(nodes.len());
    while let Some(Reverse(n)) = ready.pop() {
        topo_order.push(n.to_string());
        for s in successors.get(n).into_iter().flatten() {
            let d = indegree.get_mut(s).expect("known node");
            *d -= 1;
            if *d == 0 {
                ready.push(Reverse(s));
            }
        }
    }

    if topo_order.len() != nodes.len() {
        let cycle = indegree
            .into_iter()
            .filter(|(_, d)| *d > 0)
            .map(|(n, _)| n.to_string())
            .collect();
        return Err(GraphError::CycleDetected {
            path: GraphPath::default(),
            cycle,
        });
    }

    Ok(Dag {
        nodes,
        edges,
        topo_order,
    })
}
