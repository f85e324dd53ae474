//! PROV-JSON reading and writing.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde_json::{json, Map, Value as Json};

use super::{
    format_timestamp, ActivityStatus, AgentKind, EntityRole, ProvActivity, ProvAgent, ProvDocument, ProvEntity,
    ProvError, Relation, RelationKind,
};

const WORKFLOW_TYPE: &str = "pc:Workflow";
const TASK_TYPE: &str = "pc:Task";

/// Serialize a complete document. Object keys come out sorted, so equal
/// documents always produce identical bytes.
pub fn to_prov_json(doc: &ProvDocument) -> Result<Vec<u8>, ProvError> {
    if let Some(p) = doc.pending() {
        return Err(ProvError::PendingActivity(p.id.clone()));
    }

    let mut activities = Map::new();
    for a in doc.activities.values() {
        let mut obj = Map::new();
        for (k, v) in &a.attributes {
            obj.insert(k.clone(), Json::String(v.clone()));
        }
        obj.insert("prov:label".into(), json!(a.label));
        obj.insert("prov:startTime".into(), json!(format_timestamp(&a.start_time)));
        if let Some(end) = &a.end_time {
            obj.insert("prov:endTime".into(), json!(format_timestamp(end)));
        }
        obj.insert("pc:status".into(), json!(a.status.as_str()));
        obj.insert("pc:duration_s".into(), json!(a.duration_s()));
        match &a.node_id {
            Some(node) => {
                obj.insert("prov:type".into(), json!(TASK_TYPE));
                obj.insert("pc:node_id".into(), json!(node));
                obj.insert("pc:scope_path".into(), json!(a.scope_path));
            }
            None => {
                obj.insert("prov:type".into(), json!(WORKFLOW_TYPE));
            }
        }
        activities.insert(a.id.clone(), Json::Object(obj));
    }

    let mut entities = Map::new();
    for e in doc.entities.values() {
        let mut obj = Map::new();
        for (k, v) in &e.attributes {
            obj.insert(k.clone(), Json::String(v.clone()));
        }
        if let Some(label) = &e.label {
            obj.insert("prov:label".into(), json!(label));
        }
        obj.insert("pc:type".into(), json!(e.value_type));
        obj.insert("pc:dimensions".into(), json!(e.dimensions_summary));
        obj.insert("pc:role".into(), json!(e.role.as_str()));
        entities.insert(e.id.clone(), Json::Object(obj));
    }

    let mut agents = Map::new();
    for ag in doc.agents.values() {
        let kind = match ag.kind {
            AgentKind::Software => "prov:SoftwareAgent",
            AgentKind::Person => "prov:Person",
        };
        agents.insert(
            ag.id.clone(),
            json!({ "prov:type": kind, "prov:label": ag.name }),
        );
    }

    let mut relations: BTreeMap<RelationKind, Map<String, Json>> =
        RelationKind::ALL.iter().map(|k| (*k, Map::new())).collect();
    for (n, r) in doc.relations.iter().enumerate() {
        let (src_key, dst_key) = r.kind.role_keys();
        let mut obj = Map::new();
        obj.insert(src_key.into(), json!(r.source));
        obj.insert(dst_key.into(), json!(r.target));
        if let Some(t) = &r.time {
            obj.insert("prov:time".into(), json!(format_timestamp(t)));
        }
        relations
            .get_mut(&r.kind)
            .expect("all kinds present")
            .insert(format!("_:n{n}"), Json::Object(obj));
    }

    let mut top = Map::new();
    top.insert(
        "prefix".into(),
        Json::Object(doc.prefixes.iter().map(|(k, v)| (k.clone(), json!(v))).collect()),
    );
    top.insert("activity".into(), Json::Object(activities));
    top.insert("entity".into(), Json::Object(entities));
    top.insert("agent".into(), Json::Object(agents));
    for (kind, map) in relations {
        top.insert(kind.as_str().into(), Json::Object(map));
    }
    let mut bytes = serde_json::to_vec_pretty(&Json::Object(top)).expect("document serializes");
    bytes.push(b'\n');
    Ok(bytes)
}

fn malformed(msg: impl Into<String>) -> ProvError {
    ProvError::Malformed(msg.into())
}

fn section<'a>(top: &'a Map<String, Json>, key: &str) -> Result<Option<&'a Map<String, Json>>, ProvError> {
    match top.get(key) {
        None => Ok(None),
        Some(Json::Object(m)) => Ok(Some(m)),
        Some(_) => Err(malformed(format!("{key:?} must be an object"))),
    }
}

fn string_field(obj: &Map<String, Json>, key: &str) -> Option<String> {
    obj.get(key).and_then(Json::as_str).map(str::to_string)
}

fn string_list(obj: &Map<String, Json>, key: &str) -> Vec<String> {
    match obj.get(key) {
        Some(Json::Array(items)) => items.iter().filter_map(|v| v.as_str().map(str::to_string)).collect(),
        Some(Json::String(s)) => vec![s.clone()],
        _ => Vec::new(),
    }
}

fn timestamp(obj: &Map<String, Json>, key: &str) -> Result<Option<DateTime<Utc>>, ProvError> {
    obj.get(key)
        .and_then(Json::as_str)
        .map(|s| {
            DateTime::parse_from_rfc3339(s)
                .map(|t| t.with_timezone(&Utc))
                .map_err(|e| malformed(format!("bad timestamp {s:?}: {e}")))
        })
        .transpose()
}

fn extra_attributes(obj: &Map<String, Json>, known: &[&str]) -> BTreeMap<String, String> {
    obj.iter()
        .filter(|(k, _)| !known.contains(&k.as_str()))
        .filter_map(|(k, v)| v.as_str().map(|s| (k.clone(), s.to_string())))
        .collect()
}

/// Top-level keys a PROV-JSON document may carry.
const PROV_JSON_SECTIONS: &[&str] = &[
    "prefix", "entity", "activity", "agent", "bundle",
    "used", "wasGeneratedBy", "wasAssociatedWith", "wasInformedBy", "wasDerivedFrom",
    "wasStartedBy", "wasEndedBy", "wasInvalidatedBy", "wasAttributedTo", "actedOnBehalfOf",
    "wasInfluencedBy", "specializationOf", "alternateOf", "hadMember",
];

/// Read a PROV-JSON document as written by [`to_prov_json`]. Documents from
/// other tools load as long as they use the standard relation role keys.
pub fn from_prov_json(bytes: &[u8]) -> Result<ProvDocument, ProvError> {
    let top: Json = serde_json::from_slice(bytes).map_err(|e| malformed(e.to_string()))?;
    let top = top.as_object().ok_or_else(|| malformed("top level must be an object"))?;
    if let Some(k) = top.keys().find(|k| !PROV_JSON_SECTIONS.contains(&k.as_str())) {
        return Err(malformed(format!("{k:?} is not a PROV-JSON section")));
    }
    let mut doc = ProvDocument::default();

    if let Some(prefixes) = section(top, "prefix")? {
        for (k, v) in prefixes {
            let uri = v.as_str().ok_or_else(|| malformed(format!("prefix {k:?} is not a string")))?;
            doc.prefixes.insert(k.clone(), uri.to_string());
        }
    }

    for (id, raw) in section(top, "activity")?.into_iter().flatten() {
        let obj = raw.as_object().ok_or_else(|| malformed(format!("activity {id:?} is not an object")))?;
        let start_time = timestamp(obj, "prov:startTime")?
            .ok_or_else(|| malformed(format!("activity {id:?} has no prov:startTime")))?;
        let status = match string_field(obj, "pc:status").as_deref() {
            Some("error") => ActivityStatus::Error,
            Some("pending") => ActivityStatus::Pending,
            _ => ActivityStatus::Finished,
        };
        let is_root = string_field(obj, "prov:type").as_deref() == Some(WORKFLOW_TYPE);
        let node_id = if is_root {
            None
        } else {
            Some(string_field(obj, "pc:node_id").unwrap_or_else(|| id.clone()))
        };
        if is_root {
            doc.workflow_activity = Some(id.clone());
        }
        doc.activities.insert(
            id.clone(),
            ProvActivity {
                id: id.clone(),
                label: string_field(obj, "prov:label").unwrap_or_else(|| id.clone()),
                node_id,
                start_time,
                end_time: timestamp(obj, "prov:endTime")?,
                status,
                scope_path: string_list(obj, "pc:scope_path"),
                attributes: extra_attributes(
                    obj,
                    &[
                        "prov:label",
                        "prov:startTime",
                        "prov:endTime",
                        "prov:type",
                        "pc:status",
                        "pc:duration_s",
                        "pc:node_id",
                        "pc:scope_path",
                    ],
                ),
            },
        );
    }

    for (id, raw) in section(top, "entity")?.into_iter().flatten() {
        let obj = raw.as_object().ok_or_else(|| malformed(format!("entity {id:?} is not an object")))?;
        let role = match string_field(obj, "pc:role").as_deref() {
            Some("source") => EntityRole::Source,
            Some("result") => EntityRole::Result,
            _ => EntityRole::Intermediate,
        };
        doc.entities.insert(
            id.clone(),
            ProvEntity {
                id: id.clone(),
                label: string_field(obj, "prov:label"),
                role,
                value_type: string_field(obj, "pc:type").unwrap_or_default(),
                dimensions_summary: string_list(obj, "pc:dimensions"),
                attributes: extra_attributes(obj, &["prov:label", "pc:type", "pc:dimensions", "pc:role"]),
            },
        );
    }

    for (id, raw) in section(top, "agent")?.into_iter().flatten() {
        let obj = raw.as_object().ok_or_else(|| malformed(format!("agent {id:?} is not an object")))?;
        let kind = match string_field(obj, "prov:type").as_deref() {
            Some("prov:Person") => AgentKind::Person,
            _ => AgentKind::Software,
        };
        doc.agents.insert(
            id.clone(),
            ProvAgent {
                id: id.clone(),
                kind,
                name: string_field(obj, "prov:label").unwrap_or_else(|| id.clone()),
            },
        );
    }

    let mut relations = Vec::new();
    for kind in RelationKind::ALL {
        let (src_key, dst_key) = kind.role_keys();
        for (blank, raw) in section(top, kind.as_str())?.into_iter().flatten() {
            let obj = raw
                .as_object()
                .ok_or_else(|| malformed(format!("{kind} {blank:?} is not an object")))?;
            let endpoint = |key: &str| {
                string_field(obj, key).ok_or_else(|| malformed(format!("{kind} {blank:?} lacks {key}")))
            };
            let order = blank
                .strip_prefix("_:n")
                .and_then(|n| n.parse::<usize>().ok())
                .unwrap_or(usize::MAX);
            relations.push((
                order,
                blank.clone(),
                Relation {
                    kind,
                    source: endpoint(src_key)?,
                    target: endpoint(dst_key)?,
                    time: timestamp(obj, "prov:time")?,
                },
            ));
        }
    }
    relations.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    doc.relations = relations.into_iter().map(|(_, _, r)| r).collect();
    Ok(doc)
}
