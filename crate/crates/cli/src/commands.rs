use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use provcube_core::cube::{to_csv, to_cube_json};
use provcube_core::engine::{run_recorded, EngineSettings, ProcessRegistry, TaskHooks, Value, DEFAULT_WORKFLOW_NAME};
use provcube_core::graph::{parse_process_graph, validate as validate_graph, ProcessGraph};
use provcube_core::prov::{from_prov_json, stats, to_dot, to_prov_json, ActivityStatus, ProvDocument, ProvError, ProvRecorder, ValueDescriptor};
use provcube_service::http::{bind, serve as serve_http};
use provcube_service::{JobService, ServiceConfig};

use crate::error::CliError;
use crate::{RunArgs, ServeArgs};

/// `dir/graph.json` → `dir/graph.<suffix>`
fn sibling(graph: &Path, suffix: &str) -> PathBuf {
    let stem = graph.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    graph.with_file_name(format!("{stem}.{suffix}"))
}

fn load_graph(path: &Path) -> Result<ProcessGraph, CliError> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    parse_process_graph(&bytes).map_err(|e| CliError::Parse(e.to_string()))
}

fn load_prov(path: &Path) -> Result<ProvDocument, CliError> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    from_prov_json(&bytes).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(CliError::io(path))
}

pub fn validate(path: &Path) -> Result<(), CliError> {
    let graph = load_graph(path)?;
    let report = validate_graph(&graph, &ProcessRegistry::with_builtins().signatures());
    for finding in report.warnings().chain(report.errors()) {
        println!("{finding}");
    }
    if report.is_valid() {
        println!("ok: {} node(s), result {:?}", graph.nodes.len(), graph.result_node);
        Ok(())
    } else {
        Err(CliError::Validate(report.errors().map(|f| f.to_string()).collect()))
    }
}

struct Echo<'a> {
    recorder: &'a ProvRecorder,
    nodes: Mutex<Vec<(String, String)>>,
}

impl TaskHooks for Echo<'_> {
    fn register_source(&self, descriptor: &ValueDescriptor) -> Result<String, ProvError> {
        self.recorder.register_source_entity(descriptor)
    }

    fn begin_task(&self, node_id: &str, process_id: &str, scope: &[String], inputs: &[String]) -> Result<String, ProvError> {
        let activity = self.recorder.begin_task(node_id, process_id, scope, inputs)?;
        eprintln!("started  {node_id} ({process_id})");
        self.nodes.lock().unwrap().push((activity.clone(), node_id.to_string()));
        Ok(activity)
    }

    fn end_task(&self, activity: &str, status: ActivityStatus, outputs: &[ValueDescriptor]) -> Result<Vec<String>, ProvError> {
        let ids = self.recorder.end_task(activity, status, outputs)?;
        let nodes = self.nodes.lock().unwrap();
        let node = nodes.iter().find(|(a, _)| a == activity).map(|(_, n)| n.as_str()).unwrap_or("?");
        eprintln!("{:<8} {node}", status.as_str());
        Ok(ids)
    }
}

pub fn run(args: &RunArgs) -> Result<(), CliError> {
    let graph = load_graph(&args.graph)?;
    let registry = ProcessRegistry::with_builtins();
    let report = validate_graph(&graph, &registry.signatures());
    for finding in report.warnings() {
        eprintln!("{finding}");
    }
    if !report.is_valid() {
        for finding in report.errors() {
            eprintln!("{finding}");
        }
        return Err(CliError::Validate(report.errors().map(|f| f.to_string()).collect()));
    }

    let out = args.out.clone().unwrap_or_else(|| sibling(&args.graph, "result.json"));
    let prov_out = args.prov_out.clone().unwrap_or_else(|| sibling(&args.graph, "prov.json"));
    let mut settings = EngineSettings {
        allow_nonfinite: args.allow_nonfinite,
        output_dir: out.parent().map(Path::to_path_buf).unwrap_or_default(),
        ..Default::default()
    };
    if let Some(step) = args.grid_step {
        if !(step.is_finite() && step > 0.0) {
            return Err(CliError::Usage(format!("--grid-step must be positive, got {step}")));
        }
        settings.grid_step = step;
    }
    if settings.output_dir.as_os_str().is_empty() {
        settings.output_dir = PathBuf::from(".");
    }

    let recorder = ProvRecorder::new();
    let (result, doc) = if args.verbose {
        let echo = Echo { recorder: &recorder, nodes: Mutex::new(Vec::new()) };
        run_recorded(&graph, &registry, &settings, &recorder, &echo, DEFAULT_WORKFLOW_NAME)
    } else {
        run_recorded(&graph, &registry, &settings, &recorder, &recorder, DEFAULT_WORKFLOW_NAME)
    };

    // provenance is written for failed runs too
    let prov_bytes = to_prov_json(&doc).map_err(|e| CliError::Execute(e.to_string()))?;
    write(&prov_out, &prov_bytes)?;
    if let Some(dot) = &args.dot_out {
        write(dot, to_dot(&doc).as_bytes())?;
    }
    let outcome = result.map_err(|e| CliError::Execute(e.to_string()))?;

    let csv = out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    match &outcome.value {
        Value::Cube(c) => write(&out, &if csv { to_csv(c) } else { to_cube_json(c) })?,
        Value::Asset(a) => {
            if a.path != out {
                std::fs::copy(&a.path, &out).map_err(CliError::io(&out))?;
            }
        }
        Value::Number(n) => write(&out, serde_json::to_string(n).unwrap_or_default().as_bytes())?,
        Value::Array(v) => write(&out, serde_json::to_string(v).unwrap_or_default().as_bytes())?,
        Value::Json(j) => write(&out, j.to_string().as_bytes())?,
    }

    let s = stats(&doc);
    println!("finished: {} activities, {} entities", s.activity_count, s.entity_count);
    println!("result: {}", out.display());
    println!("provenance: {}", prov_out.display());
    if let Some(dot) = &args.dot_out {
        println!("dot: {}", dot.display());
    }
    Ok(())
}

pub fn prov_stats(path: &Path) -> Result<(), CliError> {
    let doc = load_prov(path)?;
    let s = stats(&doc);
    println!("{:<24}{}", "activities", s.activity_count);
    println!("{:<24}{}", "entities", s.entity_count);
    println!("{:<24}{}", "agents", s.agent_count);
    for (kind, n) in &s.relation_count_by_kind {
        println!("{:<24}{n}", kind.as_str());
    }
    println!("{:<24}{:.6}", "total_duration_s", s.total_duration_s.max(0.0));
    println!("{:<24}{}", "critical_path_len", s.critical_path_len);
    Ok(())
}

pub fn export_dot(path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let dot = to_dot(&load_prov(path)?);
    match out {
        Some(out) => write(out, dot.as_bytes()),
        None => {
            print!("{dot}");
            Ok(())
        }
    }
}

pub fn serve(args: &ServeArgs) -> Result<(), CliError> {
    let mut config = ServiceConfig::from_env(&args.secret_env)?;
    if let Some(port) = args.port {
        config.port = port;
    }
    if let Some(workers) = args.workers {
        config.workers = workers;
    }
    let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).try_init();

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(CliError::io("tokio runtime"))?;
    runtime.block_on(async move {
        let listener = bind(SocketAddr::from(([127, 0, 0, 1], config.port))).await?;
        let addr = listener.local_addr().map_err(CliError::io("listener"))?;
        let data_dir = config.data_dir.clone();
        let service = JobService::open(config).map_err(|e| CliError::Io {
            path: data_dir.clone(),
            source: std::io::Error::other(e.to_string()),
        })?;
        println!("listening on http://{addr}");
        println!("data directory: {}", data_dir.display());
        serve_http(listener, service, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        println!("shut down");
        Ok(())
    })
}
