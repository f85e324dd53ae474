use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::Serialize;

use super::{ProvDocument, RelationKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProvStats {
    pub activity_count: usize,
    pub entity_count: usize,
    pub agent_count: usize,
    pub relation_count_by_kind: BTreeMap<RelationKind, usize>,
    pub total_duration_s: f64,
    /// Activities on the longest wasInformedBy chain.
    pub critical_path_len: usize,
}

pub fn stats(doc: &ProvDocument) -> ProvStats {
    let mut relation_count_by_kind: BTreeMap<RelationKind, usize> =
        RelationKind::ALL.iter().map(|k| (*k, 0)).collect();
    for r in &doc.relations {
        *relation_count_by_kind.entry(r.kind).or_default() += 1;
    }

    let total_duration_s = match doc.workflow_activity.as_ref().and_then(|id| doc.activities.get(id)) {
        Some(root) => root.duration_s(),
        None => doc.activities.values().map(|a| a.duration_s()).sum(),
    };

    ProvStats {
        activity_count: doc.activities.len(),
        entity_count: doc.entities.len(),
        agent_count: doc.agents.len(),
        relation_count_by_kind,
        total_duration_s,
        critical_path_len: critical_path_len(doc),
    }
}

/// Longest path, counted in activities, through the wasInformedBy graph of
/// task activities. Nodes caught in a cycle (malformed input) are ignored.
fn critical_path_len(doc: &ProvDocument) -> usize {
    let tasks: Vec<&str> = doc.tasks().map(|a| a.id.as_str()).collect();
    if tasks.is_empty() {
        return 0;
    }
    let mut indegree: HashMap<&str, usize> = tasks.iter().map(|t| (*t, 0)).collect();
    let mut downstream: HashMap<&str, Vec<&str>> = HashMap::new();
    for r in doc.relations_of(RelationKind::WasInformedBy) {
        let (informant, informed) = (r.target.as_str(), r.source.as_str());
        if indegree.contains_key(informant) && indegree.contains_key(informed) {
            *indegree.get_mut(informed).expect("checked") += 1;
            downstream.entry(informant).or_default().push(informed);
        }
    }
    let mut depth: HashMap<&str, usize> = HashMap::new();
    let mut queue: VecDeque<&str> = tasks.iter().copied().filter(|t| indegree[t] == 0).collect();
    for t in &queue {
        depth.insert(t, 1);
    }
    let mut best = 0;
    while let Some(t) = queue.pop_front() {
        let d = depth[t];
        best = best.max(d);
        for next in downstream.get(t).into_iter().flatten() {
            let e = depth.entry(next).or_insert(0);
            *e = (*e).max(d + 1);
            let deg = indegree.get_mut(next).expect("task");
            *deg -= 1;
            if *deg == 0 {
                queue.push_back(next);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prov::{ActivityStatus, ProvRecorder, ValueDescriptor};

    fn task(r: &ProvRecorder, node: &str, inputs: &[String]) -> String {
        let a = r.begin_task(node, "p", &[], inputs).unwrap();
        r.end_task(&a, ActivityStatus::Finished, &[ValueDescriptor::scalar()])
            .unwrap()
            .remove(0)
    }

    #[test]
    fn root_only() {
        let r = ProvRecorder::new();
        r.begin_workflow("wf", "a").unwrap();
        r.end_workflow(ActivityStatus::Finished).unwrap();
        let s = stats(&r.snapshot());
        assert_eq!((s.activity_count, s.entity_count, s.agent_count), (1, 0, 1));
        assert_eq!(s.critical_path_len, 0);
        assert_eq!(s.relation_count_by_kind[&RelationKind::WasAssociatedWith], 1);
    }

    #[test]
    fn chain_and_diamond() {
        let r = ProvRecorder::new();
        r.begin_workflow("wf", "a").unwrap();
        let mut prev = vec![];
        for n in ["load", "apply", "reduce", "add"] {
            prev = vec![task(&r, n, &prev)];
        }
        let s = stats(&r.snapshot());
        assert_eq!(s.activity_count, 5);
        assert_eq!(s.critical_path_len, 4);

        let r = ProvRecorder::new();
        r.begin_workflow("wf", "a").unwrap();
        let a = task(&r, "a", &[]);
        let b = task(&r, "b", std::slice::from_ref(&a));
        let c = task(&r, "c", &[a]);
        task(&r, "d", &[b, c]);
        assert_eq!(stats(&r.snapshot()).critical_path_len, 3);
    }
}
