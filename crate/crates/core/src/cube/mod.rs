//! Dense data cubes with named, labelled dimensions.
//!
//! Values are stored row-major over the dimension list (the last dimension
//! varies fastest).

mod io;
mod ops;
mod synthetic;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{read_cube_json, to_csv, to_cube_json, write_cube, OutputFormat};
pub use synthetic::{synthetic_cube, SpatialExtent, TemporalExtent, DEFAULT_GRID_STEP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DimensionKind {
    Spatial,
    Temporal,
    Bands,
    Other,
}

impl DimensionKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "spatial" => Some(Self::Spatial),
            "temporal" => Some(Self::Temporal),
            "bands" => Some(Self::Bands),
            "other" => Some(Self::Other),
            _ => None,
        }
    }
}

/// A single coordinate label: band names and dates are strings, spatial
/// coordinates are numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Num(f64),
    Str(String),
}

impl Label {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Label::Str(s) => Some(s),
            Label::Num(_) => None,
        }
    }

    fn key(&self) -> String {
        match self {
            Label::Str(s) => format!("s:{s}"),
            Label::Num(n) if *n == 0.0 => "n:0".to_string(),
            Label::Num(n) => format!("n:{:x}", n.to_bits()),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Num(n) => write!(f, "{n}"),
            Label::Str(s) => f.write_str(s),
        }
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::Str(s.to_string())
    }
}

impl From<f64> for Label {
    fn from(n: f64) -> Self {
        Label::Num(n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dimension {
    name: String,
    kind: DimensionKind,
    labels: Vec<Label>,
}

impl Dimension {
    pub fn new(name: impl Into<String>, kind: DimensionKind, labels: Vec<Label>) -> Result<Self, CubeError> {
        let name = name.into();
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.key()) {
                return Err(CubeError::DuplicateLabel {
                    dimension: name,
                    label: l.to_string(),
                });
            }
        }
        Ok(Dimension { name, kind, labels })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> DimensionKind {
        self.kind
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    fn summary(&self) -> String {
        format!("{}:{}", self.name, self.size())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataCube {
    dimensions: Vec<Dimension>,
    values: Vec<f64>,
}

impl DataCube {
    pub fn new(dimensions: Vec<Dimension>, values: Vec<f64>) -> Result<Self, CubeError> {
        let mut names = HashSet::new();
        for d in &dimensions {
            if !names.insert(d.name.as_str()) {
                return Err(CubeError::DuplicateDimension(d.name.clone()));
            }
        }
        let expected: usize = dimensions.iter().map(Dimension::size).product();
        if expected != values.len() {
            return Err(CubeError::ShapeMismatch {
                expected,
                actual: values.len(),
            });
        }
        Ok(DataCube { dimensions, values })
    }

    pub fn dimensions(&self) -> &[Dimension] {
        &self.dimensions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn shape(&self) -> Vec<usize> {
        self.dimensions.iter().map(Dimension::size).collect()
    }

    pub fn dimension(&self, name: &str) -> Option<&Dimension> {
        self.dimensions.iter().find(|d| d.name == name)
    }

    pub fn dimension_index(&self, name: &str) -> Option<usize> {
        self.dimensions.iter().position(|d| d.name == name)
    }

    /// `"name:size"` per dimension, in dimension order.
    pub fn dimensions_summary(&self) -> Vec<String> {
        self.dimensions.iter().map(Dimension::summary).collect()
    }

    /// Row-major flat offset for a multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.dimensions.len());
        index
            .iter()
            .zip(&self.dimensions)
            .fold(0, |acc, (i, d)| acc * d.size() + i)
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.values[self.offset(index)]
    }

    pub fn has_nonfinite(&self) -> bool {
        self.values.iter().any(|v| !v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CubeError {
    #[error("label {label:?} appears twice in dimension {dimension:?}")]
    DuplicateLabel { dimension: String, label: String },
    #[error("dimension {0:?} appears twice")]
    DuplicateDimension(String),
    #[error("shape mismatch: expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("unknown dimension {0:?}")]
    UnknownDimension(String),
    #[error("dimension {0:?} already exists")]
    DimensionExists(String),
    #[error("cube has no bands dimension")]
    NoBandsDimension,
    #[error("cube has no temporal dimension")]
    NoTemporalDimension,
    #[error("unknown band {0:?}")]
    UnknownBand(String),
    #[error("invalid extent: {0}")]
    InvalidExtent(String),
    #[error("band list is empty")]
    EmptyBands,
    #[error("reduction over an empty array")]
    EmptyReduction,
    #[error("invalid temporal label {0:?}")]
    InvalidTimestamp(String),
}
