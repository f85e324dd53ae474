use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, MutexGuard};

use chrono::{DateTime, DurationRound, TimeDelta, Utc};
use uuid::Uuid;

use super::{
    ActivityStatus, AgentKind, EntityRole, ProvActivity, ProvAgent, ProvDocument, ProvEntity, ProvError,
    Relation, RelationKind, ValueDescriptor, APP_NS, PROV_NS,
};

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

const TOP_SCOPE: &str = "main";

struct State {
    doc: ProvDocument,
    generated_by: HashMap<String, String>,
    inputs: HashMap<String, Vec<String>>,
    source_seq: usize,
}

/// Collects hook calls from the executor into a [`ProvDocument`].
///
/// All methods take `&self`; calls from concurrent branches are serialized
/// on an internal lock.
pub struct ProvRecorder {
    run_id: Uuid,
    clock: Clock,
    state: Mutex<State>,
}

impl Default for ProvRecorder {
    fn default() -> Self {
        Self::new()
    }
}

impl ProvRecorder {
    pub fn new() -> Self {
        Self::with_clock(Uuid::new_v4(), Arc::new(Utc::now))
    }

    pub fn with_clock(run_id: Uuid, clock: Clock) -> Self {
        let mut doc = ProvDocument::default();
        let run = format!("urn:uuid:{run_id}/");
        doc.prefixes.insert("prov".into(), PROV_NS.into());
        doc.prefixes.insert("pc".into(), APP_NS.into());
        doc.prefixes.insert("ag".into(), format!("{APP_NS}agent/"));
        doc.prefixes.insert("act".into(), format!("{run}act/"));
        doc.prefixes.insert("ent".into(), format!("{run}ent/"));
        doc.prefixes.insert("run".into(), run);
        ProvRecorder {
            run_id,
            clock,
            state: Mutex::new(State {
                doc,
                generated_by: HashMap::new(),
                inputs: HashMap::new(),
                source_seq: 0,
            }),
        }
    }

    pub fn run_id(&self) -> Uuid {
        self.run_id
    }

    fn now(&self) -> DateTime<Utc> {
        let t = (self.clock)();
        t.duration_trunc(TimeDelta::milliseconds(1)).unwrap_or(t)
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        // a panicking hook caller must not poison provenance for everyone else
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Create the root activity and the engine agent.
    pub fn begin_workflow(&self, name: &str, agent_name: &str) -> Result<String, ProvError> {
        let now = self.now();
        let mut st = self.lock();
        if let Some(root) = &st.doc.workflow_activity {
            return Err(ProvError::InvalidState(format!("workflow {root:?} already begun")));
        }
        let id = if name.is_empty() {
            format!("act:wf-{:016x}", fnv1a(super::format_timestamp(&now).as_bytes()))
        } else {
            format!("act:{}", sanitize(name))
        };
        let agent_id = format!("ag:{}", sanitize(agent_name));
        st.doc.activities.insert(
            id.clone(),
            ProvActivity {
                id: id.clone(),
                label: if name.is_empty() { "workflow".into() } else { name.to_string() },
                node_id: None,
                start_time: now,
                end_time: None,
                status: ActivityStatus::Pending,
                scope_path: Vec::new(),
                attributes: BTreeMap::new(),
            },
        );
        st.doc.agents.insert(
            agent_id.clone(),
            ProvAgent {
                id: agent_id.clone(),
                kind: AgentKind::Software,
                name: agent_name.to_string(),
            },
        );
        st.doc.relations.push(Relation {
            kind: RelationKind::WasAssociatedWith,
            source: id.clone(),
            target: agent_id,
            time: None,
        });
        st.doc.workflow_activity = Some(id.clone());
        Ok(id)
    }

    /// Attach the human on whose behalf the run happens. At most one.
    pub fn add_person_agent(&self, name: &str) -> Result<String, ProvError> {
        let mut st = self.lock();
        let root = st
            .doc
            .workflow_activity
            .clone()
            .ok_or_else(|| ProvError::InvalidState("workflow not begun".into()))?;
        if st.doc.agents.values().any(|a| a.kind == AgentKind::Person) {
            return Err(ProvError::InvalidState("person agent already present".into()));
        }
        let id = format!("ag:person/{}", sanitize(name));
        st.doc.agents.insert(
            id.clone(),
            ProvAgent {
                id: id.clone(),
                kind: AgentKind::Person,
                name: name.to_string(),
            },
        );
        st.doc.relations.push(Relation {
            kind: RelationKind::WasAssociatedWith,
            source: root,
            target: id.clone(),
            time: None,
        });
        Ok(id)
    }

    /// Register externally provided data (the dataset a load reads).
    pub fn register_source_entity(&self, descriptor: &ValueDescriptor) -> Result<String, ProvError> {
        let mut st = self.lock();
        let id = format!("ent:source/{}", st.source_seq);
        st.source_seq += 1;
        st.doc
            .entities
            .insert(id.clone(), entity(&id, descriptor, EntityRole::Source));
        Ok(id)
    }

    pub fn begin_task(
        &self,
        node_id: &str,
        process_id: &str,
        scope_path: &[String],
        input_entity_ids: &[String],
    ) -> Result<String, ProvError> {
        let now = self.now();
        let mut st = self.lock();
        if st.doc.workflow_activity.is_none() {
            return Err(ProvError::InvalidState("workflow not begun".into()));
        }
        if let Some(missing) = input_entity_ids.iter().find(|e| !st.doc.entities.contains_key(*e)) {
            return Err(ProvError::UnknownEntity(missing.clone()));
        }

        let mut scope = vec![TOP_SCOPE.to_string()];
        scope.extend(scope_path.iter().cloned());
        let base = format!("act:{}/{}", scope.join("/"), node_id);
        let mut id = base.clone();
        let mut k = 1;
        while st.doc.activities.contains_key(&id) {
            id = format!("{base}#{k}");
            k += 1;
        }

        let mut informants: Vec<String> = Vec::new();
        for e in input_entity_ids {
            if let Some(a) = st.generated_by.get(e) {
                if !informants.contains(a) {
                    informants.push(a.clone());
                }
            }
        }
        // upstream activities must have ended before this one starts
        let start = informants
            .iter()
            .filter_map(|a| st.doc.activities.get(a).and_then(|a| a.end_time))
            .fold(now, DateTime::max);

        st.doc.activities.insert(
            id.clone(),
            ProvActivity {
                id: id.clone(),
                label: process_id.to_string(),
                node_id: Some(node_id.to_string()),
                start_time: start,
                end_time: None,
                status: ActivityStatus::Pending,
                scope_path: scope,
                attributes: BTreeMap::new(),
            },
        );
        for e in input_entity_ids {
            st.doc.relations.push(Relation {
                kind: RelationKind::Used,
                source: id.clone(),
                target: e.clone(),
                time: Some(start),
            });
        }
        for a in informants {
            st.doc.relations.push(Relation {
                kind: RelationKind::WasInformedBy,
                source: id.clone(),
                target: a,
                time: None,
            });
        }
        st.inputs.insert(id.clone(), input_entity_ids.to_vec());
        Ok(id)
    }

    pub fn end_task(
        &self,
        activity_id: &str,
        status: ActivityStatus,
        outputs: &[ValueDescriptor],
    ) -> Result<Vec<String>, ProvError> {
        if status == ActivityStatus::Pending {
            return Err(ProvError::InvalidState("cannot end an activity as pending".into()));
        }
        let now = self.now();
        let mut st = self.lock();
        let activity = st
            .doc
            .activities
            .get_mut(activity_id)
            .filter(|a| !a.is_root())
            .ok_or_else(|| ProvError::UnknownActivity(activity_id.to_string()))?;
        if activity.status != ActivityStatus::Pending {
            return Err(ProvError::AlreadyEnded(activity_id.to_string()));
        }
        let end = now.max(activity.start_time);
        activity.end_time = Some(end);
        activity.status = status;
        let stem = activity_id.strip_prefix("act:").unwrap_or(activity_id).to_string();

        let inputs = st.inputs.get(activity_id).cloned().unwrap_or_default();
        let mut ids = Vec::with_capacity(outputs.len());
        for (k, d) in outputs.iter().enumerate() {
            let id = format!("ent:{stem}/out{k}");
            let role = if d.result { EntityRole::Result } else { EntityRole::Intermediate };
            st.doc.entities.insert(id.clone(), entity(&id, d, role));
            st.generated_by.insert(id.clone(), activity_id.to_string());
            st.doc.relations.push(Relation {
                kind: RelationKind::WasGeneratedBy,
                source: id.clone(),
                target: activity_id.to_string(),
                time: Some(end),
            });
            for input in &inputs {
                st.doc.relations.push(Relation {
                    kind: RelationKind::WasDerivedFrom,
                    source: id.clone(),
                    target: input.clone(),
                    time: None,
                });
            }
            ids.push(id);
        }
        Ok(ids)
    }

    /// Attach a string attribute to an existing activity.
    pub fn annotate(&self, activity_id: &str, key: &str, value: &str) -> Result<(), ProvError> {
        let mut st = self.lock();
        let a = st
            .doc
            .activities
            .get_mut(activity_id)
            .ok_or_else(|| ProvError::UnknownActivity(activity_id.to_string()))?;
        a.attributes.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Close the root activity. Its end time covers every task.
    pub fn end_workflow(&self, status: ActivityStatus) -> Result<(), ProvError> {
        if status == ActivityStatus::Pending {
            return Err(ProvError::InvalidState("cannot end a workflow as pending".into()));
        }
        let now = self.now();
        let mut st = self.lock();
        let root = st
            .doc
            .workflow_activity
            .clone()
            .ok_or_else(|| ProvError::InvalidState("workflow not begun".into()))?;
        let latest = st
            .doc
            .activities
            .values()
            .filter_map(|a| a.end_time)
            .fold(now, DateTime::max);
        let root = st.doc.activities.get_mut(&root).expect("root registered");
        if root.status != ActivityStatus::Pending {
            return Err(ProvError::AlreadyEnded(root.id.clone()));
        }
        root.end_time = Some(latest.max(root.start_time));
        root.status = status;
        Ok(())
    }

    /// Consistent copy of the current document.
    pub fn snapshot(&self) -> ProvDocument {
        self.lock().doc.clone()
    }
}

fn entity(id: &str, d: &ValueDescriptor, role: EntityRole) -> ProvEntity {
    ProvEntity {
        id: id.to_string(),
        label: d.label.clone(),
        role,
        value_type: d.value_type.clone(),
        dimensions_summary: d.dimensions.clone(),
        attributes: d.attributes.clone(),
    }
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-/".contains(c) { c } else { '_' })
        .collect()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicI64, Ordering};

    fn ticking() -> Clock {
        let t = Arc::new(AtomicI64::new(1_700_000_000_000));
        Arc::new(move || {
            let ms = t.fetch_add(5, Ordering::SeqCst);
            DateTime::from_timestamp_millis(ms).unwrap()
        })
    }

    fn recorder() -> ProvRecorder {
        ProvRecorder::with_clock(Uuid::nil(), ticking())
    }

    #[test]
    fn begin_workflow_creates_root_agent_association() {
        let r = recorder();
        let root = r.begin_workflow("openeo-flood-mapper", "provcube/0.1").unwrap();
        assert_eq!(root, "act:openeo-flood-mapper");
        let doc = r.snapshot();
        assert_eq!(doc.activities.len(), 1);
        assert_eq!(doc.agents.len(), 1);
        assert_eq!(doc.relations.len(), 1);
        assert_eq!(doc.relations[0].kind, RelationKind::WasAssociatedWith);
        assert!(matches!(r.begin_workflow("again", "x"), Err(ProvError::InvalidState(_))));
    }

    #[test]
    fn empty_name_gets_generated_id() {
        let r = recorder();
        let root = r.begin_workflow("", "provcube/0.1").unwrap();
        assert!(root.starts_with("act:wf-"));
        assert!(root.len() > "act:wf-".len());
    }

    #[test]
    fn task_lifecycle() {
        let r = recorder();
        r.begin_workflow("wf", "provcube/0.1").unwrap();
        let src = r
            .register_source_entity(&ValueDescriptor::default().with_label("plia_dc"))
            .unwrap();
        let load = r.begin_task("load1", "load_collection", &[], std::slice::from_ref(&src)).unwrap();
        assert_eq!(load, "act:main/load1");
        let out = r
            .end_task(&load, ActivityStatus::Finished, &[ValueDescriptor::datacube(vec!["x:2".into(), "y:2".into(), "time:3".into()])])
            .unwrap();
        assert_eq!(out, vec!["ent:main/load1/out0"]);

        let apply = r.begin_task("apply1", "apply", &[], &out).unwrap();
        let doc = r.snapshot();
        assert_eq!(doc.relations_of(RelationKind::Used).filter(|u| u.source == apply).count(), 1);
        let informed: Vec<_> = doc.relations_of(RelationKind::WasInformedBy).collect();
        assert_eq!(informed.len(), 1);
        assert_eq!((informed[0].source.as_str(), informed[0].target.as_str()), (apply.as_str(), load.as_str()));
        assert_eq!(doc.entities[&out[0]].dimensions_summary, vec!["x:2", "y:2", "time:3"]);

        let none = r.end_task(&apply, ActivityStatus::Error, &[]).unwrap();
        assert!(none.is_empty());
        assert_eq!(r.snapshot().activities[&apply].status, ActivityStatus::Error);
        assert_eq!(r.end_task(&apply, ActivityStatus::Finished, &[]), Err(ProvError::AlreadyEnded(apply.clone())));
        assert!(matches!(r.end_task("act:nope", ActivityStatus::Finished, &[]), Err(ProvError::UnknownActivity(_))));
    }

    #[test]
    fn unknown_input_entity() {
        let r = recorder();
        r.begin_workflow("wf", "a").unwrap();
        assert_eq!(
            r.begin_task("n", "p", &[], &["ent:ghost".into()]),
            Err(ProvError::UnknownEntity("ent:ghost".into()))
        );
        assert!(r.begin_task("n", "p", &[], &[]).is_ok());
    }

    #[test]
    fn sources_are_not_deduplicated() {
        let r = recorder();
        let d = ValueDescriptor::default().with_label("plia_dc");
        let a = r.register_source_entity(&d).unwrap();
        let b = r.register_source_entity(&d).unwrap();
        assert_ne!(a, b);
        let doc = r.snapshot();
        assert_eq!(doc.entities[&a].role, EntityRole::Source);
        assert_eq!(doc.entities[&a].label.as_deref(), Some("plia_dc"));
        assert!(doc.entities[&a].dimensions_summary.is_empty());
    }

    #[test]
    fn derived_from_is_bipartite() {
        let r = recorder();
        r.begin_workflow("wf", "a").unwrap();
        let s1 = r.register_source_entity(&ValueDescriptor::scalar()).unwrap();
        let s2 = r.register_source_entity(&ValueDescriptor::scalar()).unwrap();
        let t = r.begin_task("n", "p", &[], &[s1, s2]).unwrap();
        r.end_task(&t, ActivityStatus::Finished, &[ValueDescriptor::scalar(), ValueDescriptor::scalar()])
            .unwrap();
        assert_eq!(r.snapshot().relations_of(RelationKind::WasDerivedFrom).count(), 4);
    }

    #[test]
    fn timings_are_ordered_and_millisecond() {
        let r = ProvRecorder::new();
        r.begin_workflow("wf", "a").unwrap();
        let t = r.begin_task("n", "p", &[], &[]).unwrap();
        r.end_task(&t, ActivityStatus::Finished, &[ValueDescriptor::scalar()]).unwrap();
        r.end_workflow(ActivityStatus::Finished).unwrap();
        for a in r.snapshot().activities.values() {
            let end = a.end_time.unwrap();
            assert!(end >= a.start_time);
            assert_eq!(a.start_time.timestamp_subsec_nanos() % 1_000_000, 0);
            assert!((a.duration_s() - (end - a.start_time).num_milliseconds() as f64 / 1000.0).abs() < 1e-3);
        }
    }

    #[test]
    fn concurrent_branches_interleave() {
        let r = Arc::new(ProvRecorder::new());
        r.begin_workflow("wf", "a").unwrap();
        let handles: Vec<_> = (0..8)
            .map(|i| {
                let r = Arc::clone(&r);
                std::thread::spawn(move || {
                    for j in 0..25 {
                        let t = r.begin_task(&format!("n{i}_{j}"), "p", &[], &[]).unwrap();
                        r.end_task(&t, ActivityStatus::Finished, &[ValueDescriptor::scalar()]).unwrap();
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        let doc = r.snapshot();
        assert_eq!(doc.tasks().count(), 200);
        assert_eq!(doc.entities.len(), 200);
        assert!(doc.dangling_references().is_empty());
    }
}
