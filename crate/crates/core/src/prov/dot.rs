//! Graphviz rendering: activities are blue boxes, entities yellow ovals,
//! agents houses. Every activity and entity gets a white note box with its
//! timing/status or type/dimensions.

use std::fmt::Write;

use super::{format_timestamp, ProvDocument};

const ACTIVITY_STYLE: &str = "shape=box, style=filled, fillcolor=\"#9fc5e8\", color=\"#1f4e79\"";
const ENTITY_STYLE: &str = "shape=ellipse, style=filled, fillcolor=\"#ffe599\", color=\"#7f6000\"";
const AGENT_STYLE: &str = "shape=house, style=filled, fillcolor=\"#f4cccc\", color=\"#660000\"";
const INFO_STYLE: &str = "shape=box, style=filled, fillcolor=white, color=\"#999999\", fontsize=9";
const INFO_EDGE_STYLE: &str = "style=dashed, arrowhead=none, color=\"#999999\"";

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn info_id(id: &str) -> String {
    format!("{id}#info")
}

pub fn to_dot(doc: &ProvDocument) -> String {
    let mut out = String::from("digraph provenance {\n  rankdir=BT;\n");

    for a in doc.activities.values() {
        let _ = writeln!(out, "  {} [{ACTIVITY_STYLE}, label={}];", quote(&a.id), quote(&a.label));
        let mut info = format!("status: {}\nduration: {:.3} s\nstart: {}", a.status.as_str(), a.duration_s(), format_timestamp(&a.start_time));
        if let Some(end) = &a.end_time {
            let _ = write!(info, "\nend: {}", format_timestamp(end));
        }
        let _ = writeln!(out, "  {} [{INFO_STYLE}, label={}];", quote(&info_id(&a.id)), quote(&info));
    }

    for e in doc.entities.values() {
        let label = e.label.clone().unwrap_or_else(|| e.id.clone());
        let _ = writeln!(out, "  {} [{ENTITY_STYLE}, label={}];", quote(&e.id), quote(&label));
        let dims = if e.dimensions_summary.is_empty() {
            "-".to_string()
        } else {
            e.dimensions_summary.join(", ")
        };
        let info = format!("type: {}\ndimensions: {dims}", e.value_type);
        let _ = writeln!(out, "  {} [{INFO_STYLE}, label={}];", quote(&info_id(&e.id)), quote(&info));
    }

    for ag in doc.agents.values() {
        let _ = writeln!(out, "  {} [{AGENT_STYLE}, label={}];", quote(&ag.id), quote(&ag.name));
    }

    for id in doc.activities.keys().chain(doc.entities.keys()) {
        let _ = writeln!(out, "  {} -> {} [{INFO_EDGE_STYLE}];", quote(id), quote(&info_id(id)));
    }

    for r in &doc.relations {
        let _ = writeln!(
            out,
            "  {} -> {} [label={}];",
            quote(&r.source),
            quote(&r.target),
            quote(r.kind.as_str())
        );
    }

    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prov::{ActivityStatus, EntityRole, ProvActivity, ProvEntity, Relation, RelationKind};
    use chrono::DateTime;
    use std::collections::BTreeMap;

    fn count(dot: &str) -> (usize, usize) {
        let body: Vec<&str> = dot.lines().filter(|l| l.starts_with("  \"")).collect();
        let edges = body.iter().filter(|l| l.contains(" -> ")).count();
        (body.len() - edges, edges)
    }

    #[test]
    fn empty_document_is_header_and_footer() {
        assert_eq!(to_dot(&ProvDocument::default()), "digraph provenance {\n  rankdir=BT;\n}\n");
    }

    #[test]
    fn one_activity_one_entity() {
        let t = DateTime::from_timestamp_millis(0).unwrap();
        let mut doc = ProvDocument::default();
        doc.activities.insert(
            "act:a".into(),
            ProvActivity {
                id: "act:a".into(),
                label: "apply".into(),
                node_id: Some("a".into()),
                start_time: t,
                end_time: Some(t),
                status: ActivityStatus::Finished,
                scope_path: vec![],
                attributes: BTreeMap::new(),
            },
        );
        doc.entities.insert(
            "ent:e".into(),
            ProvEntity {
                id: "ent:e".into(),
                label: None,
                role: EntityRole::Intermediate,
                value_type: "datacube".into(),
                dimensions_summary: vec!["x:2".into(), "y:2".into()],
                attributes: BTreeMap::new(),
            },
        );
        doc.relations.push(Relation {
            kind: RelationKind::WasGeneratedBy,
            source: "ent:e".into(),
            target: "act:a".into(),
            time: None,
        });
        let dot = to_dot(&doc);
        assert_eq!(count(&dot), (4, 3));
        assert!(dot.contains("type: datacube\\ndimensions: x:2, y:2"));
        assert!(dot.contains("status: finished"));
        assert!(dot.contains("\"ent:e\" -> \"act:a\" [label=\"wasGeneratedBy\"]"));
    }

    #[test]
    fn quoting() {
        assert_eq!(quote("a\"b\\c\nd"), "\"a\\\"b\\\\c\\nd\"");
    }
}
