//! Built-in processes.

use std::path::{Component, Path, PathBuf};

use serde_json::Value as Json;

use super::{Args, Env, ProcessDef, ProcessError, SavedAsset, Value};
use crate::cube::{
    synthetic_cube, write_cube, CubeError, DimensionKind, Label, OutputFormat, SpatialExtent, TemporalExtent,
};
use crate::graph::{build_dag, Argument, ProcessGraph};
use crate::prov::ValueDescriptor;

pub(super) fn builtins() -> Vec<ProcessDef> {
    vec![
        ProcessDef::new(
            "load_collection",
            &["id", "spatial_extent", "temporal_extent"],
            "Load a synthetic collection cube.",
            |a, env| load(a, env, a.string("id")?),
        )
        .with_source(|a| source_descriptor(a, "id")),
        ProcessDef::new(
            "load_stac",
            &["url"],
            "Load a synthetic cube seeded by a STAC URL.",
            |a, env| load(a, env, a.string("url")?),
        )
        .with_source(|a| source_descriptor(a, "url")),
        ProcessDef::new("filter_bands", &["data", "bands"], "Keep the named bands.", |a, _| {
            let bands = a
                .opt_string_list("bands")?
                .ok_or_else(|| ProcessError::MissingArgument("bands".into()))?;
            Ok(Value::Cube(a.cube("data")?.filter_bands(&bands)?))
        }),
        ProcessDef::new(
            "filter_temporal",
            &["data", "extent"],
            "Keep time labels in [start, end).",
            |a, _| {
                let (start, end) = temporal_bounds(a.json("extent"), "extent")?;
                Ok(Value::Cube(a.cube("data")?.filter_temporal(start, end)?))
            },
        ),
        ProcessDef::new("apply", &["data", "process"], "Map a child graph over every value.", apply),
        ProcessDef::new(
            "reduce_dimension",
            &["data", "dimension", "reducer"],
            "Collapse one dimension with a child reducer.",
            reduce_dimension,
        ),
        ProcessDef::new(
            "add_dimension",
            &["data", "name", "label"],
            "Append a size-1 dimension.",
            add_dimension,
        ),
        ProcessDef::new("ndvi", &["data"], "Normalized difference of two bands.", |a, _| {
            let nir = a.opt_string("nir")?.unwrap_or("nir");
            let red = a.opt_string("red")?.unwrap_or("red");
            Ok(Value::Cube(a.cube("data")?.ndvi(nir, red)?))
        }),
        ProcessDef::new(
            "save_result",
            &["data", "format"],
            "Write a cube to disk.",
            save_result,
        ),
        binary("add", |x, y| x + y),
        binary("subtract", |x, y| x - y),
        binary("multiply", |x, y| x * y),
        binary("divide", |x, y| x / y),
        reducer("mean", 1, |d| d.iter().sum::<f64>() / d.len() as f64),
        reducer("sum", 1, |d| d.iter().sum()),
        reducer("min", 1, |d| d.iter().copied().fold(f64::INFINITY, f64::min)),
        reducer("max", 1, |d| d.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        reducer("sd", 2, sample_sd),
    ]
}

fn source_descriptor(a: &Args<'_>, key: &str) -> Option<ValueDescriptor> {
    let name = a.opt_string(key).ok().flatten()?;
    Some(ValueDescriptor {
        label: Some(name.to_string()),
        value_type: "collection".into(),
        ..Default::default()
    })
}

const DEFAULT_SPATIAL: SpatialExtent = SpatialExtent {
    west: 0.0,
    south: 0.0,
    east: 1.0,
    north: 1.0,
};
const DEFAULT_DAY: &str = "2020-01-01";

pub(crate) fn spatial_extent(v: Option<&Json>) -> Result<Option<SpatialExtent>, ProcessError> {
    let Some(v) = v else { return Ok(None) };
    let obj = v
        .as_object()
        .ok_or_else(|| ProcessError::invalid("spatial_extent", "expected an object"))?;
    let side = |k: &str| {
        obj.get(k)
            .and_then(Json::as_f64)
            .ok_or_else(|| ProcessError::invalid("spatial_extent", format!("missing numeric {k:?}")))
    };
    Ok(Some(SpatialExtent {
        west: side("west")?,
        south: side("south")?,
        east: side("east")?,
        north: side("north")?,
    }))
}

fn temporal_bounds<'j>(v: Option<&'j Json>, name: &str) -> Result<(Option<&'j str>, Option<&'j str>), ProcessError> {
    let items = v
        .and_then(Json::as_array)
        .filter(|a| a.len() == 2)
        .ok_or_else(|| ProcessError::invalid(name, "expected [start, end]"))?;
    let bound = |j: &'j Json| match j {
        Json::Null => Ok(None),
        Json::String(s) => Ok(Some(s.as_str())),
        _ => Err(ProcessError::invalid(name, "bounds must be date strings or null")),
    };
    Ok((bound(&items[0])?, bound(&items[1])?))
}

fn load(a: &Args<'_>, env: &Env<'_>, collection: &str) -> Result<Value, ProcessError> {
    let spatial = spatial_extent(a.json("spatial_extent"))?.unwrap_or(DEFAULT_SPATIAL);
    let temporal = match a.json("temporal_extent") {
        None => TemporalExtent::parse(DEFAULT_DAY, DEFAULT_DAY)?,
        Some(j) => match temporal_bounds(Some(j), "temporal_extent")? {
            (Some(s), Some(e)) => TemporalExtent::parse(s, e)?,
            _ => return Err(ProcessError::invalid("temporal_extent", "both bounds are required")),
        },
    };
    let bands = a.opt_string_list("bands")?;
    let cube = synthetic_cube(collection, &spatial, &temporal, bands.as_deref(), env.settings.grid_step)?;
    Ok(Value::Cube(cube))
}

fn apply(a: &Args<'_>, env: &Env<'_>) -> Result<Value, ProcessError> {
    let child = env.callable("process", a.callable("process")?)?;
    match a.value("data")? {
        Value::Cube(cube) => Ok(Value::Cube(cube.try_map(|v| child.call_number("x", Value::Number(v)))?)),
        Value::Number(n) => Ok(Value::Number(child.call_number("x", Value::Number(*n))?)),
        Value::Array(items) => Ok(Value::Array(
            items
                .iter()
                .map(|v| child.call_number("x", Value::Number(*v)))
                .collect::<Result<_, _>>()?,
        )),
        other => Err(ProcessError::invalid("data", format!("cannot apply over {}", other.type_name()))),
    }
}

fn reduce_dimension(a: &Args<'_>, env: &Env<'_>) -> Result<Value, ProcessError> {
    let cube = a.cube("data")?;
    let dimension = a.string("dimension")?;
    let child = env.callable("reducer", a.callable("reducer")?)?;
    let out = cube.reduce(dimension, |slice| child.call_number("data", Value::Array(slice.to_vec())))?;
    Ok(Value::Cube(out))
}

fn add_dimension(a: &Args<'_>, _: &Env<'_>) -> Result<Value, ProcessError> {
    let cube = a.cube("data")?;
    let name = a.string("name")?;
    let label = match a.value("label")? {
        Value::Number(n) => Label::Num(*n),
        Value::Json(Json::String(s)) => Label::Str(s.clone()),
        other => return Err(ProcessError::invalid("label", format!("expected string or number, got {}", other.type_name()))),
    };
    let kind = match a.opt_string("type")? {
        None => DimensionKind::Other,
        Some(t) => DimensionKind::parse(t).ok_or_else(|| ProcessError::invalid("type", format!("unknown dimension type {t:?}")))?,
    };
    Ok(Value::Cube(cube.add_dimension(name, label, kind)?))
}

/// Resolve a requested output path against the engine's output directory.
fn output_path(requested: Option<&str>, env: &Env<'_>, format: OutputFormat) -> Result<PathBuf, ProcessError> {
    let default_name = format!("{}.{}", env.node_id, format.extension());
    let requested = Path::new(requested.unwrap_or(&default_name));
    if env.settings.confine_outputs
        && (requested.is_absolute() || requested.components().any(|c| !matches!(c, Component::Normal(_))))
    {
        return Err(ProcessError::Io(format!(
            "output path {} leaves the job directory",
            requested.display()
        )));
    }
    Ok(env.settings.output_dir.join(requested))
}

fn save_result(a: &Args<'_>, env: &Env<'_>) -> Result<Value, ProcessError> {
    let cube = a.cube("data")?;
    let name = a.string("format")?;
    let format = OutputFormat::parse(name).ok_or_else(|| ProcessError::UnknownFormat(name.to_string()))?;
    let path = output_path(a.opt_string("path")?, env, format)?;
    write_cube(cube, format, &path).map_err(|e| ProcessError::Io(format!("{}: {e}", path.display())))?;
    Ok(Value::Asset(SavedAsset { path, format }))
}

fn binary(id: &'static str, op: fn(f64, f64) -> f64) -> ProcessDef {
    ProcessDef::new(id, &["x", "y"], "Elementwise arithmetic with scalar broadcasting.", move |a, _| {
        combine(a.value("x")?, a.value("y")?, op)
    })
}

fn combine(x: &Value, y: &Value, op: fn(f64, f64) -> f64) -> Result<Value, ProcessError> {
    let mismatch = |l: usize, r: usize| ProcessError::Cube(CubeError::ShapeMismatch { expected: l, actual: r });
    Ok(match (x, y) {
        (Value::Number(p), Value::Number(q)) => Value::Number(op(*p, *q)),
        (Value::Cube(c), Value::Number(q)) => Value::Cube(c.map(|v| op(v, *q))),
        (Value::Number(p), Value::Cube(c)) => Value::Cube(c.map(|v| op(*p, v))),
        (Value::Cube(l), Value::Cube(r)) => Value::Cube(l.zip_with(r, op)?),
        (Value::Array(l), Value::Number(q)) => Value::Array(l.iter().map(|v| op(*v, *q)).collect()),
        (Value::Number(p), Value::Array(r)) => Value::Array(r.iter().map(|v| op(*p, *v)).collect()),
        (Value::Array(l), Value::Array(r)) => {
            if l.len() != r.len() {
                return Err(mismatch(l.len(), r.len()));
            }
            Value::Array(l.iter().zip(r).map(|(p, q)| op(*p, *q)).collect())
        }
        (l, r) => {
            return Err(ProcessError::Other(format!(
                "cannot combine {} with {}",
                l.type_name(),
                r.type_name()
            )))
        }
    })
}

fn reducer(id: &'static str, min_len: usize, f: fn(&[f64]) -> f64) -> ProcessDef {
    ProcessDef::new(id, &["data"], "Reduce an array to a scalar.", move |a, _| {
        let data: &[f64] = match a.value("data")? {
            Value::Array(v) => v,
            Value::Cube(c) => c.values(),
            Value::Json(Json::Array(items)) if items.is_empty() => &[],
            other => return Err(ProcessError::invalid("data", format!("expected an array, got {}", other.type_name()))),
        };
        if data.is_empty() {
            return Err(CubeError::EmptyReduction.into());
        }
        if data.len() < min_len {
            return Err(ProcessError::invalid("data", format!("{id} needs at least {min_len} values")));
        }
        Ok(Value::Number(f(data)))
    })
}

/// Standard deviation with the n-1 denominator.
fn sample_sd(d: &[f64]) -> f64 {
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Spatial extent of the first load node in execution order, if the graph
/// has one. A load without an extent reports the default it would use.
pub fn load_extent(graph: &ProcessGraph) -> Option<SpatialExtent> {
    let order = build_dag(graph).ok()?.topo_order;
    order.iter().find_map(|id| {
        let node = &graph.nodes[id];
        if node.process_id != "load_collection" && node.process_id != "load_stac" {
            return None;
        }
        match node.argument("spatial_extent") {
            Some(Argument::Literal(j)) if !j.is_null() => spatial_extent(Some(j)).ok().flatten(),
            _ => Some(DEFAULT_SPATIAL),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_value;

    #[test]
    fn load_extent_of_first_load() {
        let g = parse_value(&serde_json::json!({
            "a": {"process_id": "load_collection", "arguments": {"id": "c", "spatial_extent": {"west": 1, "south": 2, "east": 3, "north": 4}}},
            "b": {"process_id": "apply", "arguments": {"data": {"from_node": "a"}}, "result": true}
        }))
        .unwrap();
        assert_eq!(load_extent(&g).map(|e| e.bbox()), Some([1.0, 2.0, 3.0, 4.0]));

        let g = parse_value(&serde_json::json!({"a": {"process_id": "add", "arguments": {"x": 1, "y": 2}, "result": true}})).unwrap();
        assert_eq!(load_extent(&g), None);

        let g = parse_value(&serde_json::json!({"a": {"process_id": "load_stac", "arguments": {"url": "u"}, "result": true}})).unwrap();
        assert_eq!(load_extent(&g), Some(DEFAULT_SPATIAL));
    }
}
