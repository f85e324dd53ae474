use std::collections::BTreeMap;

use serde_json::{Map, Value as Json};

use super::{Argument, GraphError, GraphPath, ProcessGraph, ProcessNode};

/// Deepest allowed child-graph nesting (the top-level graph is depth 0).
pub const MAX_NESTING_DEPTH: usize = 16;

/// Parse process-graph JSON bytes.
///
/// Accepts either a bare node map or the client export wrapper
/// `{"process_graph": {..}, ..}`.
pub fn parse_process_graph(text: &[u8]) -> Result<ProcessGraph, GraphError> {
    let root = GraphPath::default();
    let doc: Json = serde_json::from_slice(text).map_err(|e| GraphError::MalformedDocument {
        path: root.clone(),
        reason: format!("invalid JSON: {e}"),
    })?;
    parse_value(&doc)
}

/// Parse an already-decoded JSON value. See [`parse_process_graph`].
pub fn parse_value(doc: &Json) -> Result<ProcessGraph, GraphError> {
    let root = GraphPath::default();
    let obj = doc.as_object().ok_or_else(|| GraphError::MalformedDocument {
        path: root.clone(),
        reason: "top level must be a JSON object".into(),
    })?;
    let nodes = match unwrap_export(obj) {
        Some(inner) => inner,
        None => obj,
    };
    parse_scope(nodes, &root)
}

fn unwrap_export(obj: &Map<String, Json>) -> Option<&Map<String, Json>> {
    let inner = obj.get("process_graph")?.as_object()?;
    if inner.contains_key("process_id") {
        // a node that happens to be called "process_graph"
        return None;
    }
    Some(inner)
}

fn parse_scope(obj: &Map<String, Json>, path: &GraphPath) -> Result<ProcessGraph, GraphError> {
    if path.depth() > MAX_NESTING_DEPTH {
        return Err(GraphError::MalformedDocument {
            path: path.clone(),
            reason: format!("child graphs nested deeper than {MAX_NESTING_DEPTH} levels"),
        });
    }
    if obj.is_empty() {
        return Err(GraphError::MalformedDocument {
            path: path.clone(),
            reason: "process graph has no nodes".into(),
        });
    }

    let mut nodes = BTreeMap::new();
    for (id, raw) in obj {
        nodes.insert(id.clone(), parse_node(id, raw, path)?);
    }

    let results: Vec<&String> = nodes
        .iter()
        .filter(|(_, n)| n.result)
        .map(|(id, _)| id)
        .collect();
    if results.len() != 1 {
        return Err(GraphError::ResultCountError {
            path: path.clone(),
            count: results.len(),
        });
    }
    let result_node = results[0].clone();

    for (id, node) in &nodes {
        for arg in node.arguments.values() {
            if let Argument::NodeRef(target) = arg {
                if !nodes.contains_key(target) {
                    return Err(GraphError::DanglingReference {
                        path: path.clone(),
                        node: id.clone(),
                        target: target.clone(),
                    });
                }
            }
        }
    }

    let graph = ProcessGraph { nodes, result_node };
    if let Some(cycle) = find_cycle(&graph) {
        return Err(GraphError::CycleDetected {
            path: path.clone(),
            cycle,
        });
    }
    Ok(graph)
}

fn parse_node(id: &str, raw: &Json, path: &GraphPath) -> Result<ProcessNode, GraphError> {
    let malformed = |reason: String| GraphError::MalformedDocument {
        path: path.clone(),
        reason,
    };
    let obj = raw
        .as_object()
        .ok_or_else(|| malformed(format!("node {id:?} is not an object")))?;

    let process_id = match obj.get("process_id") {
        None | Some(Json::Null) => None,
        Some(Json::String(s)) => Some(s.clone()),
        Some(_) => return Err(malformed(format!("node {id:?}: process_id must be a string"))),
    };
    let process_id = process_id
        .filter(|p| !p.is_empty())
        .ok_or_else(|| GraphError::MissingProcessId {
            path: path.clone(),
            node: id.to_string(),
        })?;

    let result = match obj.get("result") {
        None | Some(Json::Null) => false,
        Some(Json::Bool(b)) => *b,
        Some(_) => return Err(malformed(format!("node {id:?}: result must be a boolean"))),
    };
    let description = match obj.get("description") {
        None | Some(Json::Null) => None,
        Some(Json::String(s)) => Some(s.clone()),
        Some(_) => return Err(malformed(format!("node {id:?}: description must be a string"))),
    };

    let mut arguments = BTreeMap::new();
    match obj.get("arguments") {
        None | Some(Json::Null) => {}
        Some(Json::Object(args)) => {
            for (name, value) in args {
                arguments.insert(name.clone(), parse_argument(id, name, value, path)?);
            }
        }
        Some(_) => return Err(malformed(format!("node {id:?}: arguments must be an object"))),
    }

    Ok(ProcessNode {
        process_id,
        arguments,
        result,
        description,
    })
}

fn parse_argument(node: &str, name: &str, value: &Json, path: &GraphPath) -> Result<Argument, GraphError> {
    let Some(obj) = value.as_object() else {
        return Ok(Argument::Literal(value.clone()));
    };
    if obj.len() != 1 {
        return Ok(Argument::Literal(value.clone()));
    }
    let (key, inner) = obj.iter().next().expect("one entry");
    let arg = match (key.as_str(), inner) {
        ("from_node", Json::String(target)) => Argument::NodeRef(target.clone()),
        ("from_parameter", Json::String(param)) => Argument::ParameterRef(param.clone()),
        ("process_graph", Json::Object(child)) => {
            Argument::ChildGraph(parse_scope(child, &path.child(node, name))?)
        }
        ("from_node" | "from_parameter" | "process_graph", _) => {
            return Err(GraphError::MalformedDocument {
                path: path.clone(),
                reason: format!("node {node:?} argument {name:?}: malformed {key} reference"),
            })
        }
        _ => Argument::Literal(value.clone()),
    };
    Ok(arg)
}

/// Depth-first search for a back edge; returns the node ids on one cycle.
fn find_cycle(graph: &ProcessGraph) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Fresh,
        OnStack,
        Done,
    }

    fn visit<'a>(
        graph: &'a ProcessGraph,
        id: &'a str,
        marks: &mut BTreeMap<&'a str, Mark>,
        stack: &mut Vec<&'a str>,
    ) -> Option<Vec<String>> {
        marks.insert(id, Mark::OnStack);
        stack.push(id);
        for (_, target) in graph.node_refs(id) {
            match marks.get(target).copied().unwrap_or(Mark::Fresh) {
                Mark::OnStack => {
                    let start = stack.iter().position(|s| *s == target).expect("on stack");
                    return Some(stack[start..].iter().map(|s| s.to_string()).collect());
                }
                Mark::Fresh => {
                    if let Some(c) = visit(graph, target, marks, stack) {
                        return Some(c);
                    }
                }
                Mark::Done => {}
            }
        }
        stack.pop();
        marks.insert(id, Mark::Done);
        None
    }

    let mut marks = BTreeMap::new();
    for id in graph.nodes.keys() {
        if marks.get(id.as_str()).copied().unwrap_or(Mark::Fresh) == Mark::Fresh {
            let mut stack = Vec::new();
            if let Some(c) = visit(graph, id, &mut marks, &mut stack) {
                return Some(c);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn parse(v: Json) -> Result<ProcessGraph, GraphError> {
        parse_process_graph(v.to_string().as_bytes())
    }

    #[test]
    fn minimal_single_node() {
        let g = parse(json!({"n1": {"process_id": "load_stac", "arguments": {"url": "s"}, "result": true}})).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert_eq!(g.result_node, "n1");
        assert_eq!(
            g.nodes["n1"].arguments["url"],
            Argument::Literal(json!("s"))
        );
    }

    #[test]
    fn three_step_chain_with_nested_reducer() {
        let g = parse(json!({
            "load1": {"process_id": "load_stac", "arguments": {"url": "https://example.org/stac"}},
            "reduce1": {"process_id": "reduce_dimension", "arguments": {
                "data": {"from_node": "load1"},
                "dimension": "t",
                "reducer": {"process_graph": {
                    "mean1": {"process_id": "mean", "arguments": {"data": {"from_parameter": "data"}}, "result": true}
                }}
            }},
            "save1": {"process_id": "save_result", "arguments": {"data": {"from_node": "reduce1"}, "format": "cube-json"}, "result": true}
        }))
        .unwrap();
        assert_eq!(g.node_ref_count(), 2);
        let Argument::ChildGraph(child) = &g.nodes["reduce1"].arguments["reducer"] else {
            panic!("reducer should be a child graph");
        };
        assert_eq!(child.result_node, "mean1");
        assert_eq!(
            child.nodes["mean1"].arguments["data"],
            Argument::ParameterRef("data".into())
        );
    }

    #[test]
    fn two_result_flags_rejected() {
        let err = parse(json!({
            "n1": {"process_id": "load_stac", "arguments": {"url": "s"}, "result": true},
            "n2": {"process_id": "load_stac", "arguments": {"url": "s"}, "result": true}
        }))
        .unwrap_err();
        assert!(matches!(err, GraphError::ResultCountError { count: 2, .. }));
    }

    #[test]
    fn zero_result_in_child_reports_path() {
        let err = parse(json!({
            "r": {"process_id": "reduce_dimension", "result": true, "arguments": {
                "reducer": {"process_graph": {"m": {"process_id": "mean", "arguments": {}}}}
            }}
        }))
        .unwrap_err();
        match err {
            GraphError::ResultCountError { path, count } => {
                assert_eq!(count, 0);
                assert_eq!(path.to_string(), "/r/reducer");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(
            parse_process_graph(b"not json"),
            Err(GraphError::MalformedDocument { .. })
        ));
        assert!(matches!(parse(json!([1, 2])), Err(GraphError::MalformedDocument { .. })));
        assert!(matches!(
            parse(json!({"a": {"process_id": 3, "result": true}})),
            Err(GraphError::MalformedDocument { .. })
        ));
    }

    #[test]
    fn missing_process_id() {
        let err = parse(json!({"a": {"arguments": {}, "result": true}})).unwrap_err();
        assert!(matches!(err, GraphError::MissingProcessId { node, .. } if node == "a"));
        let err = parse(json!({"a": {"process_id": "", "result": true}})).unwrap_err();
        assert!(matches!(err, GraphError::MissingProcessId { .. }));
    }

    #[test]
    fn dangling_reference() {
        let err = parse(json!({
            "a": {"process_id": "p", "arguments": {"x": {"from_node": "ghost"}}, "result": true}
        }))
        .unwrap_err();
        assert!(matches!(err, GraphError::DanglingReference { target, .. } if target == "ghost"));
    }

    #[test]
    fn cross_scope_reference_is_dangling() {
        let err = parse(json!({
            "outer": {"process_id": "load", "arguments": {}},
            "r": {"process_id": "apply", "result": true, "arguments": {
                "data": {"from_node": "outer"},
                "process": {"process_graph": {
                    "inner": {"process_id": "add", "arguments": {"x": {"from_node": "outer"}}, "result": true}
                }}
            }}
        }))
        .unwrap_err();
        assert!(matches!(err, GraphError::DanglingReference { node, .. } if node == "inner"));
    }

    #[test]
    fn cycle_lists_members() {
        let err = parse(json!({
            "a": {"process_id": "p", "arguments": {"x": {"from_node": "c"}}},
            "b": {"process_id": "p", "arguments": {"x": {"from_node": "a"}}},
            "c": {"process_id": "p", "arguments": {"x": {"from_node": "b"}}, "result": true}
        }))
        .unwrap_err();
        match err {
            GraphError::CycleDetected { mut cycle, .. } => {
                cycle.sort();
                assert_eq!(cycle, vec!["a", "b", "c"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn self_loop_is_cycle() {
        let err = parse(json!({"a": {"process_id": "p", "arguments": {"x": {"from_node": "a"}}, "result": true}}))
            .unwrap_err();
        assert!(matches!(err, GraphError::CycleDetected { cycle, .. } if cycle == vec!["a"]));
    }

    #[test]
    fn bounding_box_object_is_literal() {
        let g = parse(json!({"a": {"process_id": "load_collection", "result": true, "arguments": {
            "spatial_extent": {"west": 1, "south": 2, "east": 3, "north": 4}
        }}}))
        .unwrap();
        assert!(matches!(g.nodes["a"].arguments["spatial_extent"], Argument::Literal(_)));
    }

    #[test]
    fn export_wrapper_accepted() {
        let g = parse(json!({"process_graph": {"n1": {"process_id": "x", "result": true}}})).unwrap();
        assert_eq!(g.result_node, "n1");
        // a node literally named process_graph is still a node
        let g = parse(json!({"process_graph": {"process_id": "x", "result": true}})).unwrap();
        assert_eq!(g.result_node, "process_graph");
    }

    fn nested(depth: usize) -> Json {
        let mut inner = json!({"leaf": {"process_id": "constant", "arguments": {"x": 1}, "result": true}});
        for _ in 0..depth {
            inner = json!({"n": {"process_id": "apply", "result": true, "arguments": {"process": {"process_graph": inner}}}});
        }
        inner
    }

    #[test]
    fn nesting_depth_limit() {
        assert!(parse(nested(MAX_NESTING_DEPTH)).is_ok());
        assert!(matches!(
            parse(nested(MAX_NESTING_DEPTH + 1)),
            Err(GraphError::MalformedDocument { .. })
        ));
    }

    #[test]
    fn serialize_round_trip() {
        let text = json!({
            "load1": {"process_id": "load_collection", "arguments": {"id": "c", "bands": ["a"]}, "description": "d"},
            "r": {"process_id": "reduce_dimension", "result": true, "arguments": {
                "data": {"from_node": "load1"},
                "reducer": {"process_graph": {"m": {"process_id": "mean", "arguments": {"data": {"from_parameter": "data"}}, "result": true}}}
            }}
        });
        let g = parse(text).unwrap();
        let again = parse(g.to_json()).unwrap();
        assert_eq!(g, again);
    }
}
