//! Test-only PROV-JSON reader and process-graph generator, shared by the
//! integration suites of several crates.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use proptest::sample::Index;
use serde_json::{json, Map, Value as Json};

const TOP_KEYS: [&str; 9] = [
    "prefix",
    "activity",
    "entity",
    "agent",
    "used",
    "wasGeneratedBy",
    "wasAssociatedWith",
    "wasInformedBy",
    "wasDerivedFrom",
];

/// (relation key, source role, target role, source class, target class)
const RELATIONS: [(&str, &str, &str, &str, &str); 5] = [
    ("used", "prov:activity", "prov:entity", "activity", "entity"),
    ("wasGeneratedBy", "prov:entity", "prov:activity", "entity", "activity"),
    ("wasAssociatedWith", "prov:activity", "prov:agent", "activity", "agent"),
    ("wasInformedBy", "prov:informed", "prov:informant", "activity", "activity"),
    ("wasDerivedFrom", "prov:generatedEntity", "prov:usedEntity", "entity", "entity"),
];

#[derive(Debug, Clone)]
pub struct Activity {
    pub start: String,
    pub end: String,
    pub status: String,
    pub node_id: Option<String>,
    pub duration_s: f64,
}

#[derive(Debug, Clone)]
pub struct Entity {
    pub role: String,
    pub value_type: String,
    pub dimensions: Vec<String>,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Edge {
    pub kind: String,
    pub source: String,
    pub target: String,
}

/// A PROV-JSON document read without the crate under test.
#[derive(Debug, Clone, Default)]
pub struct ProvView {
    pub prefixes: BTreeMap<String, String>,
    pub activities: BTreeMap<String, Activity>,
    pub entities: BTreeMap<String, Entity>,
    pub agents: BTreeMap<String, String>,
    pub relations: Vec<Edge>,
}

fn obj<'a>(v: &'a Json, what: &str) -> Result<&'a Map<String, Json>, String> {
    v.as_object().ok_or_else(|| format!("{what} is not an object"))
}

fn text(o: &Map<String, Json>, key: &str, what: &str) -> Result<String, String> {
    o.get(key)
        .and_then(Json::as_str)
        .map(str::to_string)
        .ok_or_else(|| format!("{what}: missing string {key}"))
}

/// `YYYY-MM-DDTHH:MM:SS.mmmZ`
fn is_millis_timestamp(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 24
        && b.iter().enumerate().all(|(i, c)| match i {
            4 | 7 => *c == b'-',
            10 => *c == b'T',
            13 | 16 => *c == b':',
            19 => *c == b'.',
            23 => *c == b'Z',
            _ => c.is_ascii_digit(),
        })
}

pub fn read(bytes: &[u8]) -> Result<ProvView, String> {
    let top: Json = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    let top = obj(&top, "document")?;
    let keys: BTreeSet<&str> = top.keys().map(String::as_str).collect();
    if keys != TOP_KEYS.into_iter().collect() {
        return Err(format!("unexpected top-level keys {keys:?}"));
    }
    let mut view = ProvView::default();
    for (k, v) in obj(&top["prefix"], "prefix")? {
        view.prefixes
            .insert(k.clone(), v.as_str().ok_or("prefix value not a string")?.to_string());
    }
    for (id, a) in obj(&top["activity"], "activity")? {
        let a = obj(a, id)?;
        let start = text(a, "prov:startTime", id)?;
        let end = text(a, "prov:endTime", id)?;
        if !is_millis_timestamp(&start) || !is_millis_timestamp(&end) {
            return Err(format!("{id}: timestamps not millisecond UTC: {start} {end}"));
        }
        view.activities.insert(
            id.clone(),
            Activity {
                start,
                end,
                status: text(a, "pc:status", id)?,
                node_id: a.get("pc:node_id").and_then(Json::as_str).map(str::to_string),
                duration_s: a
                    .get("pc:duration_s")
                    .and_then(Json::as_f64)
                    .ok_or_else(|| format!("{id}: missing pc:duration_s"))?,
            },
        );
    }
    for (id, e) in obj(&top["entity"], "entity")? {
        let e = obj(e, id)?;
        let dimensions = e
            .get("pc:dimensions")
            .and_then(Json::as_array)
            .ok_or_else(|| format!("{id}: missing pc:dimensions"))?
            .iter()
            .map(|d| d.as_str().map(str::to_string).ok_or(format!("{id}: bad dimension")))
            .collect::<Result<_, _>>()?;
        view.entities.insert(
            id.clone(),
            Entity {
                role: text(e, "pc:role", id)?,
                value_type: text(e, "pc:type", id)?,
                dimensions,
                label: e.get("prov:label").and_then(Json::as_str).map(str::to_string),
            },
        );
    }
    for (id, ag) in obj(&top["agent"], "agent")? {
        view.agents.insert(id.clone(), text(obj(ag, id)?, "prov:type", id)?);
    }
    let mut blank_ids = BTreeSet::new();
    for (kind, src_role, dst_role, _, _) in RELATIONS {
        for (bid, r) in obj(&top[kind], kind)? {
            let digits = bid.strip_prefix("_:n").unwrap_or("");
            if digits.is_empty() || !digits.bytes().all(|c| c.is_ascii_digit()) {
                return Err(format!("{kind}: bad blank node id {bid:?}"));
            }
            if !blank_ids.insert(bid.clone()) {
                return Err(format!("blank node {bid} reused"));
            }
            let r = obj(r, bid)?;
            view.relations.push(Edge {
                kind: kind.to_string(),
                source: text(r, src_role, bid)?,
                target: text(r, dst_role, bid)?,
            });
        }
    }
    Ok(view)
}

impl ProvView {
    fn has(&self, class: &str, id: &str) -> bool {
        match class {
            "activity" => self.activities.contains_key(id),
            "entity" => self.entities.contains_key(id),
            _ => self.agents.contains_key(id),
        }
    }

    pub fn count(&self, kind: &str) -> usize {
        self.relations.iter().filter(|r| r.kind == kind).count()
    }

    pub fn edges<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.relations.iter().filter(move |r| r.kind == kind)
    }

    pub fn tasks(&self) -> impl Iterator<Item = (&String, &Activity)> {
        self.activities.iter().filter(|(_, a)| a.node_id.is_some())
    }

    /// Every structural property a completed run must satisfy.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();

        for r in &self.relations {
            let (_, _, _, sc, tc) = RELATIONS.iter().find(|k| k.0 == r.kind).unwrap();
            if !self.has(sc, &r.source) || !self.has(tc, &r.target) {
                out.push(format!("dangling {} {} -> {}", r.kind, r.source, r.target));
            }
        }

        for (id, a) in &self.activities {
            if a.start > a.end {
                out.push(format!("{id} ends before it starts"));
            }
            if a.status != "finished" && a.status != "error" {
                out.push(format!("{id} has status {}", a.status));
            }
        }

        let generated: Vec<&Edge> = self.edges("wasGeneratedBy").collect();
        let non_source = self.entities.values().filter(|e| e.role != "source").count();
        if generated.len() != non_source {
            out.push(format!("{} wasGeneratedBy for {non_source} generated entities", generated.len()));
        }
        let mut producer = BTreeMap::new();
        for g in &generated {
            if producer.insert(g.source.as_str(), g.target.as_str()).is_some() {
                out.push(format!("{} generated twice", g.source));
            }
        }
        for (id, e) in &self.entities {
            if e.role == "source" && producer.contains_key(id.as_str()) {
                out.push(format!("source {id} has a generator"));
            }
        }

        // activity dependency graph: wasInformedBy plus used∘wasGeneratedBy
        let mut deps: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for r in self.edges("wasInformedBy") {
            deps.entry(&r.source).or_default().insert(&r.target);
        }
        for r in self.edges("used") {
            if let Some(p) = producer.get(r.target.as_str()) {
                deps.entry(&r.source).or_default().insert(p);
            }
        }
        if let Some(cycle_at) = find_cycle(&deps) {
            out.push(format!("dependency cycle through {cycle_at}"));
        }

        for r in self.edges("wasInformedBy") {
            if let (Some(down), Some(up)) = (self.activities.get(&r.source), self.activities.get(&r.target)) {
                if up.end > down.end {
                    out.push(format!("{} ends after the {} it informs", r.target, r.source));
                }
            }
        }

        let software = self.agents.values().filter(|t| *t == "prov:SoftwareAgent").count();
        if software != 1 {
            out.push(format!("{software} software agents"));
        }
        out
    }
}

fn find_cycle<'a>(deps: &BTreeMap<&'a str, BTreeSet<&'a str>>) -> Option<&'a str> {
    fn visit<'a>(
        n: &'a str,
        deps: &BTreeMap<&'a str, BTreeSet<&'a str>>,
        state: &mut BTreeMap<&'a str, u8>,
    ) -> Option<&'a str> {
        match state.get(n) {
            Some(1) => return Some(n),
            Some(_) => return None,
            None => {}
        }
        state.insert(n, 1);
        for m in deps.get(n).into_iter().flatten() {
            if let Some(c) = visit(m, deps, state) {
                return Some(c);
            }
        }
        state.insert(n, 2);
        None
    }
    let mut state = BTreeMap::new();
    deps.keys().find_map(|n| visit(n, deps, &mut state))
}

/// The graph with timestamps, durations, and the run uuid removed;
/// relations become a sorted multiset keyed by kind.
pub fn erase_run_details(bytes: &[u8]) -> Json {
    let mut top: Json = serde_json::from_slice(bytes).expect("valid json");
    let top = top.as_object_mut().expect("object");
    for v in top["prefix"].as_object_mut().unwrap().values_mut() {
        if let Some(s) = v.as_str() {
            if let Some(rest) = s.strip_prefix("urn:uuid:") {
                let tail = rest.find('/').map_or("", |i| &rest[i..]);
                *v = Json::String(format!("urn:uuid:RUN{tail}"));
            }
        }
    }
    for section in ["activity", "entity"] {
        for a in top[section].as_object_mut().unwrap().values_mut() {
            let a = a.as_object_mut().unwrap();
            for k in ["prov:startTime", "prov:endTime", "pc:duration_s"] {
                a.remove(k);
            }
        }
    }
    for (kind, ..) in RELATIONS {
        let mut rels: Vec<Json> = top[kind]
            .as_object()
            .unwrap()
            .values()
            .map(|r| {
                let mut r = r.clone();
                r.as_object_mut().unwrap().remove("prov:time");
                r
            })
            .collect();
        rels.sort_by_key(|r| r.to_string());
        top.insert(kind.to_string(), Json::Array(rels));
    }
    Json::Object(top.clone())
}

/// Top-level nodes the result node depends on, read straight off the JSON.
pub fn reachable_nodes(graph: &Json) -> BTreeSet<String> {
    let nodes = graph.as_object().unwrap();
    let result = nodes
        .iter()
        .find(|(_, n)| n["result"] == json!(true))
        .map(|(id, _)| id.clone())
        .unwrap();
    let mut seen = BTreeSet::new();
    let mut stack = vec![result];
    while let Some(id) = stack.pop() {
        if seen.insert(id.clone()) {
            stack.extend(node_inputs(graph, &id));
        }
    }
    seen
}

/// Distinct `from_node` targets among one node's arguments.
pub fn node_inputs(graph: &Json, id: &str) -> BTreeSet<String> {
    graph[id]["arguments"]
        .as_object()
        .unwrap()
        .values()
        .filter_map(|a| a.as_object())
        .filter(|a| a.len() == 1)
        .filter_map(|a| a.get("from_node").and_then(Json::as_str))
        .map(str::to_string)
        .collect()
}

pub fn is_source_process(process_id: &str) -> bool {
    matches!(process_id, "load_collection" | "load_stac")
}

const EXTENT: [&str; 2] = ["2023-01-01", "2023-01-03"];

fn load_node(i: usize) -> Json {
    json!({
        "process_id": "load_collection",
        "arguments": {
            "id": format!("coll{i}"),
            "spatial_extent": {"west": 0.0, "south": 0.0, "east": 1.0, "north": 1.0},
            "temporal_extent": EXTENT
        }
    })
}

fn child(result: Json) -> Json {
    json!({ "process_graph": result })
}

/// Build an acyclic graph from raw choices. Node `i` only reads nodes
/// `< i`; dimension summaries are tracked so most graphs run cleanly.
pub fn build_graph(choices: &[(u8, Index, Index, f64)]) -> Json {
    let mut nodes = Map::new();
    let mut shapes: Vec<Vec<String>> = Vec::new();
    for (i, (op, a, b, s)) in choices.iter().enumerate() {
        let id = format!("n{i}");
        let (node, shape) = if i == 0 || *op == 0 {
            (load_node(i), vec!["x:2".into(), "y:2".into(), "time:3".into()])
        } else {
            let src = a.index(i);
            let src_id = format!("n{src}");
            let shape = shapes[src].clone();
            let data = json!({"from_node": src_id});
            match op {
                1 => (
                    json!({"process_id": "apply", "arguments": {"data": data, "process": child(json!({
                        "m": {"process_id": "multiply", "arguments": {"x": {"from_parameter": "x"}, "y": s}},
                        "a": {"process_id": "add", "arguments": {"x": {"from_node": "m"}, "y": 1}, "result": true}
                    }))}}),
                    shape,
                ),
                2 => {
                    let other = b.index(i);
                    let process = ["add", "subtract", "multiply", "divide"][b.index(4)];
                    let y = if other != src && shapes[other] == shape {
                        json!({"from_node": format!("n{other}")})
                    } else {
                        json!(s)
                    };
                    (json!({"process_id": process, "arguments": {"x": data, "y": y}}), shape)
                }
                3 if shape.len() >= 2 => {
                    let k = b.index(shape.len());
                    let dim = shape[k].split(':').next().unwrap().to_string();
                    let reducer = ["mean", "sum", "min", "max"][b.index(4)];
                    let mut out = shape.clone();
                    out.remove(k);
                    (
                        json!({"process_id": "reduce_dimension", "arguments": {
                            "data": data, "dimension": dim,
                            "reducer": child(json!({"r": {"process_id": reducer, "arguments": {"data": {"from_parameter": "data"}}, "result": true}}))
                        }}),
                        out,
                    )
                }
                4 => {
                    let name = format!("extra{i}");
                    let mut out = shape.clone();
                    out.push(format!("{name}:1"));
                    (
                        json!({"process_id": "add_dimension", "arguments": {"data": data, "name": name, "label": "l"}}),
                        out,
                    )
                }
                5 if shape.iter().any(|d| d.starts_with("time:")) => {
                    let out = shape
                        .iter()
                        .map(|d| if d.starts_with("time:") { "time:2".to_string() } else { d.clone() })
                        .collect();
                    (
                        json!({"process_id": "filter_temporal", "arguments": {"data": data, "extent": EXTENT}}),
                        out,
                    )
                }
                6 => (
                    // fails at run time: the dimension does not exist
                    json!({"process_id": "reduce_dimension", "arguments": {
                        "data": data, "dimension": "nope",
                        "reducer": child(json!({"r": {"process_id": "mean", "arguments": {"data": {"from_parameter": "data"}}, "result": true}}))
                    }}),
                    shape,
                ),
                _ => (
                    json!({"process_id": "multiply", "arguments": {"x": data, "y": s}}),
                    shape,
                ),
            }
        };
        nodes.insert(id, node);
        shapes.push(shape);
    }
    let last = format!("n{}", choices.len() - 1);
    nodes[&last]["result"] = json!(true);
    Json::Object(nodes)
}

/// Acyclic process graphs with 1 to `max_nodes` nodes.
pub fn random_graph(max_nodes: usize) -> impl Strategy<Value = Json> {
    prop::collection::vec(
        (0u8..8, any::<Index>(), any::<Index>(), -4.0f64..4.0),
        1..=max_nodes,
    )
    .prop_map(|choices| build_graph(&choices))
}
