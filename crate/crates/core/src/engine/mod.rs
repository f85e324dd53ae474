//! Graph execution over data cubes.

mod hooks;
mod processes;
mod registry;

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use serde_json::Value as Json;
use thiserror::Error;

use crate::cube::{CubeError, DataCube, OutputFormat, DEFAULT_GRID_STEP};
use crate::graph::{build_dag, Argument, GraphError, ProcessGraph};
use crate::prov::{ActivityStatus, ProvDocument, ProvError, ProvRecorder, ValueDescriptor};

pub use hooks::{NoHooks, TaskHooks};
pub use processes::load_extent;
pub use registry::{Args, Callable, Env, ProcessDef, ProcessRegistry};

/// A value flowing between process nodes.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Cube(DataCube),
    Number(f64),
    Array(Vec<f64>),
    /// Any other literal (strings, booleans, objects, mixed arrays, null).
    Json(Json),
    Asset(SavedAsset),
}

/// A file written by `save_result`.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedAsset {
    pub path: PathBuf,
    pub format: OutputFormat,
}

impl Value {
    pub fn from_json(v: &Json) -> Value {
        match v {
            Json::Number(n) => n.as_f64().map_or_else(|| Value::Json(v.clone()), Value::Number),
            Json::Array(items) if !items.is_empty() && items.iter().all(Json::is_number) => {
                Value::Array(items.iter().filter_map(Json::as_f64).collect())
            }
            other => Value::Json(other.clone()),
        }
    }

    pub fn as_cube(&self) -> Option<&DataCube> {
        match self {
            Value::Cube(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Cube(_) => "datacube",
            Value::Number(_) => "scalar",
            Value::Array(_) => "array",
            Value::Json(_) => "literal",
            Value::Asset(_) => "file",
        }
    }

    fn has_nonfinite(&self) -> bool {
        match self {
            Value::Cube(c) => c.has_nonfinite(),
            Value::Number(n) => !n.is_finite(),
            Value::Array(a) => a.iter().any(|v| !v.is_finite()),
            Value::Json(_) | Value::Asset(_) => false,
        }
    }

    /// Entity description of this value for the provenance record.
    pub fn descriptor(&self) -> ValueDescriptor {
        match self {
            Value::Cube(c) => ValueDescriptor::datacube(c.dimensions_summary()),
            Value::Number(_) => ValueDescriptor::scalar(),
            Value::Array(a) => ValueDescriptor {
                value_type: "array".into(),
                dimensions: vec![format!("index:{}", a.len())],
                ..Default::default()
            },
            Value::Json(_) => ValueDescriptor {
                value_type: "literal".into(),
                ..Default::default()
            },
            Value::Asset(asset) => {
                let mut d = ValueDescriptor {
                    value_type: "file".into(),
                    ..Default::default()
                };
                d.attributes.insert("pc:format".into(), asset.format.name().into());
                d.attributes.insert("pc:media_type".into(), asset.format.media_type().into());
                d
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineSettings {
    /// Degrees per synthetic grid cell along x and y.
    pub grid_step: f64,
    /// When false the first NaN/±inf produced by any node fails that node.
    pub allow_nonfinite: bool,
    /// Base directory for relative `save_result` paths.
    pub output_dir: PathBuf,
    /// Reject `save_result` paths that leave `output_dir`.
    pub confine_outputs: bool,
}

impl Default for EngineSettings {
    fn default() -> Self {
        EngineSettings {
            grid_step: DEFAULT_GRID_STEP,
            allow_nonfinite: true,
            output_dir: PathBuf::from("."),
            confine_outputs: false,
        }
    }
}

/// Everything threaded through the execution of one (sub-)graph.
pub struct ExecutionContext<'a> {
    pub parameter_bindings: BTreeMap<String, Value>,
    pub hooks: &'a dyn TaskHooks,
    pub scope_path: Vec<String>,
    pub settings: &'a EngineSettings,
}

impl<'a> ExecutionContext<'a> {
    pub fn new(hooks: &'a dyn TaskHooks, settings: &'a EngineSettings) -> Self {
        ExecutionContext {
            parameter_bindings: BTreeMap::new(),
            hooks,
            scope_path: Vec::new(),
            settings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProcessError {
    #[error(transparent)]
    Cube(#[from] CubeError),
    #[error("missing argument {0:?}")]
    MissingArgument(String),
    #[error("argument {name:?}: {reason}")]
    InvalidArgument { name: String, reason: String },
    #[error("parameter {0:?} is not bound in this scope")]
    UnboundParameter(String),
    #[error("non-finite value produced")]
    NonFinite,
    #[error("unknown output format {0:?}")]
    UnknownFormat(String),
    #[error("i/o failure: {0}")]
    Io(String),
    #[error("in child graph: {0}")]
    Child(Box<EngineError>),
    #[error("{0}")]
    Other(String),
}

impl ProcessError {
    pub fn invalid(name: &str, reason: impl Into<String>) -> Self {
        ProcessError::InvalidArgument {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("node {node_id:?}: unknown process {process_id:?}")]
    UnknownProcess { node_id: String, process_id: String },
    #[error("node {node_id:?} failed: {cause}")]
    ProcessFailure { node_id: String, cause: ProcessError },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("provenance: {0}")]
    Provenance(#[from] ProvError),
}

impl EngineError {
    /// The top-level node responsible for the failure, if any.
    pub fn node_id(&self) -> Option<&str> {
        match self {
            EngineError::UnknownProcess { node_id, .. } | EngineError::ProcessFailure { node_id, .. } => Some(node_id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionOutcome {
    pub value: Value,
    /// Files written by `save_result` nodes, in execution order.
    pub assets: Vec<SavedAsset>,
}

/// Execute `graph` and return the result node's value.
///
/// Only nodes the result depends on run, each exactly once, in the DAG's
/// topological order.
pub fn execute(graph: &ProcessGraph, registry: &ProcessRegistry, ctx: &ExecutionContext<'_>) -> Result<ExecutionOutcome, EngineError> {
    let dag = build_dag(graph)?;
    run_scope(graph, &dag.topo_order, registry, ctx)
}

pub(crate) fn run_scope(
    graph: &ProcessGraph,
    topo_order: &[String],
    registry: &ProcessRegistry,
    ctx: &ExecutionContext<'_>,
) -> Result<ExecutionOutcome, EngineError> {
    let reachable = crate::graph::ancestors_of_result(graph);
    let mut memo: HashMap<&str, (Value, Option<String>)> = HashMap::new();
    let mut assets = Vec::new();

    for node_id in topo_order.iter().filter(|n| reachable.contains(n.as_str())) {
        let node = &graph.nodes[node_id];
        let def = registry.get(&node.process_id).ok_or_else(|| EngineError::UnknownProcess {
            node_id: node_id.clone(),
            process_id: node.process_id.clone(),
        })?;
        let failure = |cause| EngineError::ProcessFailure {
            node_id: node_id.clone(),
            cause,
        };

        let mut args = Args::default();
        let mut inputs = Vec::new();
        let mut unresolved = None;
        for (name, arg) in &node.arguments {
            match arg {
                Argument::Literal(v) => args.insert(name, Value::from_json(v)),
                Argument::NodeRef(target) => {
                    let (value, entity) = &memo[target.as_str()];
                    if let Some(e) = entity {
                        if !inputs.contains(e) {
                            inputs.push(e.clone());
                        }
                    }
                    args.insert(name, value.clone());
                }
                Argument::ParameterRef(param) => match ctx.parameter_bindings.get(param) {
                    Some(v) => args.insert(name, v.clone()),
                    None => unresolved = Some(param.clone()),
                },
                Argument::ChildGraph(child) => args.insert_callable(name, child),
            }
        }

        if let Some(descriptor) = def.source_descriptor(&args) {
            inputs.insert(0, ctx.hooks.register_source(&descriptor)?);
        }
        let activity = ctx
            .hooks
            .begin_task(node_id, &node.process_id, &ctx.scope_path, &inputs)?;

        let env = Env {
            registry,
            settings: ctx.settings,
            node_id,
            scope_path: &ctx.scope_path,
        };
        let outcome = match unresolved {
            Some(p) => Err(ProcessError::UnboundParameter(p)),
            None => def.call(&args, &env),
        }
        .and_then(|v| {
            if !ctx.settings.allow_nonfinite && v.has_nonfinite() {
                Err(ProcessError::NonFinite)
            } else {
                Ok(v)
            }
        });

        match outcome {
            Ok(value) => {
                let mut descriptor = value.descriptor();
                descriptor.result = *node_id == graph.result_node;
                let entity = ctx
                    .hooks
                    .end_task(&activity, ActivityStatus::Finished, &[descriptor])?
                    .into_iter()
                    .next();
                if let Value::Asset(a) = &value {
                    assets.push(a.clone());
                }
                memo.insert(node_id, (value, entity));
            }
            Err(cause) => {
                ctx.hooks.end_task(&activity, ActivityStatus::Error, &[])?;
                return Err(failure(cause));
            }
        }
    }

    let (value, _) = memo
        .remove(graph.result_node.as_str())
        .expect("result node is reachable from itself");
    Ok(ExecutionOutcome { value, assets })
}

/// Default workflow name used when the caller gives none.
pub const DEFAULT_WORKFLOW_NAME: &str = "workflow";

/// Run a graph under a fresh recorder and close the root activity with the
/// run's outcome. The document is returned on success and failure alike.
pub fn run_recorded(
    graph: &ProcessGraph,
    registry: &ProcessRegistry,
    settings: &EngineSettings,
    recorder: &ProvRecorder,
    hooks: &dyn TaskHooks,
    workflow_name: &str,
) -> (Result<ExecutionOutcome, EngineError>, ProvDocument) {
    let result = recorder
        .begin_workflow(workflow_name, crate::ENGINE_AGENT)
        .map_err(EngineError::from)
        .and_then(|_| execute(graph, registry, &ExecutionContext::new(hooks, settings)));
    let status = if result.is_ok() {
        ActivityStatus::Finished
    } else {
        ActivityStatus::Error
    };
    // begin_workflow can only fail on a reused recorder, which still has a root
    let _ = recorder.end_workflow(status);
    (result, recorder.snapshot())
}
