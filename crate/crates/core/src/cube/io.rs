use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::{DataCube, Dimension, DimensionKind, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    CubeJson,
    Csv,
}

impl OutputFormat {
    /// Format names accepted by `save_result` (case-insensitive).
    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "cube-json" | "json" => Some(Self::CubeJson),
            "csv" => Some(Self::Csv),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Self::CubeJson => "json",
            Self::Csv => "csv",
        }
    }

    pub fn media_type(self) -> &'static str {
        match self {
            Self::CubeJson => "application/json",
            Self::Csv => "text/csv",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::CubeJson => "cube-json",
            Self::Csv => "csv",
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DimensionJson {
    name: String,
    kind: DimensionKind,
    labels: Vec<Label>,
}

#[derive(Serialize, Deserialize)]
struct CubeJson {
    dimensions: Vec<DimensionJson>,
    values: Vec<Json>,
}

// JSON has no NaN or infinities; they travel as strings.
fn encode_value(v: f64) -> Json {
    if v.is_nan() {
        Json::String("NaN".into())
    } else if v == f64::INFINITY {
        Json::String("Infinity".into())
    } else if v == f64::NEG_INFINITY {
        Json::String("-Infinity".into())
    } else {
        serde_json::Number::from_f64(v).map(Json::Number).expect("finite")
    }
}

fn decode_value(v: &Json) -> Result<f64, String> {
    match v {
        Json::Number(n) => n.as_f64().ok_or_else(|| format!("unrepresentable number {n}")),
        Json::String(s) => match s.as_str() {
            "NaN" => Ok(f64::NAN),
            "Infinity" => Ok(f64::INFINITY),
            "-Infinity" => Ok(f64::NEG_INFINITY),
            other => Err(format!("unexpected value {other:?}")),
        },
        other => Err(format!("unexpected value {other}")),
    }
}

pub fn to_cube_json(cube: &DataCube) -> Vec<u8> {
    let doc = CubeJson {
        dimensions: cube
            .dimensions()
            .iter()
            .map(|d| DimensionJson {
                name: d.name().to_string(),
                kind: d.kind(),
                labels: d.labels().to_vec(),
            })
            .collect(),
        values: cube.values().iter().copied().map(encode_value).collect(),
    };
    serde_json::to_vec(&doc).expect("cube serializes")
}

pub fn read_cube_json(bytes: &[u8]) -> Result<DataCube, String> {
    let doc: CubeJson = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    let dimensions = doc
        .dimensions
        .into_iter()
        .map(|d| Dimension::new(d.name, d.kind, d.labels))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let values = doc.values.iter().map(decode_value).collect::<Result<Vec<_>, _>>()?;
    DataCube::new(dimensions, values).map_err(|e| e.to_string())
}

fn csv_field(s: &str, force_quote: bool) -> String {
    if force_quote || s.contains([',', '"', '\r', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per cell: every label column, then the value. CRLF line endings.
pub fn to_csv(cube: &DataCube) -> Vec<u8> {
    let mut out = String::new();
    let header: Vec<String> = cube
        .dimensions()
        .iter()
        .map(|d| csv_field(d.name(), false))
        .chain(std::iter::once("value".to_string()))
        .collect();
    out.push_str(&header.join(","));
    out.push_str("\r\n");

    let shape = cube.shape();
    let mut index = vec![0usize; shape.len()];
    for &v in cube.values() {
        for (axis, &i) in index.iter().enumerate() {
            let label = cube.dimensions()[axis].labels()[i].to_string();
            out.push_str(&csv_field(&label, true));
            out.push(',');
        }
        out.push_str(&v.to_string());
        out.push_str("\r\n");
        // odometer increment, last axis fastest
        for axis in (0..shape.len()).rev() {
            index[axis] += 1;
            if index[axis] < shape[axis] {
                break;
            }
            index[axis] = 0;
        }
    }
    out.into_bytes()
}

pub fn write_cube(cube: &DataCube, format: OutputFormat, path: &Path) -> std::io::Result<()> {
    let bytes = match format {
        OutputFormat::CubeJson => to_cube_json(cube),
        OutputFormat::Csv => to_csv(cube),
    };
    fs::write(path, bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::DimensionKind;

    fn square() -> DataCube {
        let x = Dimension::new("x", DimensionKind::Spatial, vec![0.25.into(), 0.75.into()]).unwrap();
        let y = Dimension::new("y", DimensionKind::Spatial, vec![1.0.into(), 2.0.into()]).unwrap();
        DataCube::new(vec![x, y], vec![1.0, 2.5, f64::NAN, f64::NEG_INFINITY]).unwrap()
    }

    #[test]
    fn cube_json_round_trip() {
        let cube = square();
        let back = read_cube_json(&to_cube_json(&cube)).unwrap();
        assert_eq!(back.dimensions(), cube.dimensions());
        assert_eq!(back.values()[..2], cube.values()[..2]);
        assert!(back.values()[2].is_nan());
        assert_eq!(back.values()[3], f64::NEG_INFINITY);
    }

    #[test]
    fn values_round_trip_bit_exact() {
        let x = Dimension::new("x", DimensionKind::Spatial, vec![0.25.into(), 0.75.into(), 1.25.into(), 1.75.into()]).unwrap();
        let values = vec![-518772.22040310485, 0.1 + 0.2, f64::MIN_POSITIVE, -0.0];
        let cube = DataCube::new(vec![x], values.clone()).unwrap();
        let back = read_cube_json(&to_cube_json(&cube)).unwrap();
        let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(back.values()), bits(&values));
    }

    #[test]
    fn csv_layout() {
        let text = String::from_utf8(to_csv(&square())).unwrap();
        let rows: Vec<&str> = text.split("\r\n").collect();
        assert_eq!(rows.len(), 6, "header + 4 rows + trailing empty");
        assert_eq!(rows[0], "x,y,value");
        assert_eq!(rows[1], "\"0.25\",\"1\",1");
        assert_eq!(rows[2], "\"0.25\",\"2\",2.5");
        assert_eq!(rows[3], "\"0.75\",\"1\",NaN");
        assert_eq!(rows[5], "");
    }

    #[test]
    fn csv_escapes() {
        let b = Dimension::new("bands", DimensionKind::Bands, vec!["a\"b".into()]).unwrap();
        let cube = DataCube::new(vec![b], vec![0.5]).unwrap();
        let text = String::from_utf8(to_csv(&cube)).unwrap();
        assert_eq!(text, "bands,value\r\n\"a\"\"b\",0.5\r\n");
    }

    #[test]
    fn unwritable_path_fails() {
        let err = write_cube(&square(), OutputFormat::CubeJson, Path::new("/nonexistent-dir/x/out.json"));
        assert!(err.is_err());
    }
}
