use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::Value as Json;

use super::{run_scope, EngineError, EngineSettings, ExecutionContext, NoHooks, ProcessError, Value};
use crate::cube::DataCube;
use crate::graph::{build_dag, ProcessGraph, Signatures};
use crate::prov::ValueDescriptor;

type ProcessFn = dyn Fn(&Args<'_>, &Env<'_>) -> Result<Value, ProcessError> + Send + Sync;
type SourceFn = dyn Fn(&Args<'_>) -> Option<ValueDescriptor> + Send + Sync;

/// Resolved arguments of one node invocation.
#[derive(Default)]
pub struct Args<'g> {
    values: BTreeMap<String, Value>,
    callables: BTreeMap<String, &'g ProcessGraph>,
}

impl<'g> Args<'g> {
    pub fn insert(&mut self, name: &str, value: Value) {
        self.values.insert(name.to_string(), value);
    }

    pub fn insert_callable(&mut self, name: &str, graph: &'g ProcessGraph) {
        self.callables.insert(name.to_string(), graph);
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.get(name).filter(|v| !matches!(v, Value::Json(Json::Null)))
    }

    pub fn value(&self, name: &str) -> Result<&Value, ProcessError> {
        self.get(name).ok_or_else(|| ProcessError::MissingArgument(name.to_string()))
    }

    pub fn cube(&self, name: &str) -> Result<&DataCube, ProcessError> {
        match self.value(name)? {
            Value::Cube(c) => Ok(c),
            other => Err(ProcessError::invalid(name, format!("expected a datacube, got {}", other.type_name()))),
        }
    }

    pub fn number(&self, name: &str) -> Result<f64, ProcessError> {
        match self.value(name)? {
            Value::Number(n) => Ok(*n),
            other => Err(ProcessError::invalid(name, format!("expected a number, got {}", other.type_name()))),
        }
    }

    pub fn string(&self, name: &str) -> Result<&str, ProcessError> {
        self.opt_string(name)?
            .ok_or_else(|| ProcessError::MissingArgument(name.to_string()))
    }

    pub fn opt_string(&self, name: &str) -> Result<Option<&str>, ProcessError> {
        match self.get(name) {
            None => Ok(None),
            Some(Value::Json(Json::String(s))) => Ok(Some(s)),
            Some(other) => Err(ProcessError::invalid(name, format!("expected a string, got {}", other.type_name()))),
        }
    }

    pub fn json(&self, name: &str) -> Option<&Json> {
        match self.get(name) {
            Some(Value::Json(j)) => Some(j),
            _ => None,
        }
    }

    pub fn opt_string_list(&self, name: &str) -> Result<Option<Vec<String>>, ProcessError> {
        match self.get(name) {
            None => Ok(None),
            Some(Value::Json(Json::Array(items))) => items
                .iter()
                .map(|v| {
                    v.as_str()
                        .map(str::to_string)
                        .ok_or_else(|| ProcessError::invalid(name, "expected a list of strings"))
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(_) => Err(ProcessError::invalid(name, "expected a list of strings")),
        }
    }

    pub fn callable(&self, name: &str) -> Result<&'g ProcessGraph, ProcessError> {
        self.callables
            .get(name)
            .copied()
            .ok_or_else(|| ProcessError::invalid(name, "expected a child process graph"))
    }
}

/// What a process implementation can see of the running engine.
pub struct Env<'a> {
    pub registry: &'a ProcessRegistry,
    pub settings: &'a EngineSettings,
    pub node_id: &'a str,
    pub scope_path: &'a [String],
}

impl<'a> Env<'a> {
    /// Prepare a child graph for repeated evaluation.
    pub fn callable<'g>(&self, argument: &str, graph: &'g ProcessGraph) -> Result<Callable<'g, 'a>, ProcessError> {
        let dag = build_dag(graph).map_err(|e| ProcessError::Child(Box::new(e.into())))?;
        let mut scope_path = self.scope_path.to_vec();
        scope_path.push(self.node_id.to_string());
        scope_path.push(argument.to_string());
        Ok(Callable {
            graph,
            topo_order: dag.topo_order,
            registry: self.registry,
            settings: self.settings,
            scope_path,
        })
    }
}

/// A child graph ready to be called with parameter bindings.
pub struct Callable<'g, 'a> {
    graph: &'g ProcessGraph,
    topo_order: Vec<String>,
    registry: &'a ProcessRegistry,
    settings: &'a EngineSettings,
    scope_path: Vec<String>,
}

impl Callable<'_, '_> {
    /// Evaluate in a fresh scope that sees only `bindings`.
    pub fn call(&self, bindings: BTreeMap<String, Value>) -> Result<Value, ProcessError> {
        let ctx = ExecutionContext {
            parameter_bindings: bindings,
            hooks: &NoHooks,
            scope_path: self.scope_path.clone(),
            settings: self.settings,
        };
        run_scope(self.graph, &self.topo_order, self.registry, &ctx)
            .map(|o| o.value)
            .map_err(|e: EngineError| ProcessError::Child(Box::new(e)))
    }

    pub fn call_number(&self, parameter: &str, value: Value) -> Result<f64, ProcessError> {
        match self.call(BTreeMap::from([(parameter.to_string(), value)]))? {
            Value::Number(n) => Ok(n),
            other => Err(ProcessError::Other(format!(
                "child graph returned {} where a number was expected",
                other.type_name()
            ))),
        }
    }
}

/// A registered process: implementation plus signature metadata.
#[derive(Clone)]
pub struct ProcessDef {
    pub id: String,
    pub required: Vec<String>,
    pub description: String,
    implementation: Arc<ProcessFn>,
    source: Option<Arc<SourceFn>>,
}

impl ProcessDef {
    pub fn new<F>(id: &str, required: &[&str], description: &str, f: F) -> Self
    where
        F: Fn(&Args<'_>, &Env<'_>) -> Result<Value, ProcessError> + Send + Sync + 'static,
    {
        ProcessDef {
            id: id.to_string(),
            required: required.iter().map(|s| s.to_string()).collect(),
            description: description.to_string(),
            implementation: Arc::new(f),
            source: None,
        }
    }

    /// Mark the process as reading external data described by `f`.
    pub fn with_source<F>(mut self, f: F) -> Self
    where
        F: Fn(&Args<'_>) -> Option<ValueDescriptor> + Send + Sync + 'static,
    {
        self.source = Some(Arc::new(f));
        self
    }

    pub fn call(&self, args: &Args<'_>, env: &Env<'_>) -> Result<Value, ProcessError> {
        (self.implementation)(args, env)
    }

    pub fn source_descriptor(&self, args: &Args<'_>) -> Option<ValueDescriptor> {
        self.source.as_ref().and_then(|f| f(args))
    }
}

impl std::fmt::Debug for ProcessDef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProcessDef")
            .field("id", &self.id)
            .field("required", &self.required)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ProcessRegistry {
    processes: BTreeMap<String, ProcessDef>,
}

impl ProcessRegistry {
    /// Registry with nothing in it.
    pub fn empty() -> Self {
        Self::default()
    }

    /// Registry with every built-in process.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        for def in super::processes::builtins() {
            r.register(def);
        }
        r
    }

    /// Add or replace a process.
    pub fn register(&mut self, def: ProcessDef) -> Option<ProcessDef> {
        self.processes.insert(def.id.clone(), def)
    }

    pub fn get(&self, id: &str) -> Option<&ProcessDef> {
        self.processes.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.processes.keys().map(String::as_str)
    }

    pub fn processes(&self) -> impl Iterator<Item = &ProcessDef> {
        self.processes.values()
    }

    pub fn signatures(&self) -> Signatures {
        self.processes
            .values()
            .map(|d| (d.id.clone(), d.required.clone()))
            .collect()
    }
}
