//! Deterministic stand-in data for collection loads.

use chrono::{Days, NaiveDate};

use super::ops::parse_instant;
use super::{CubeError, DataCube, Dimension, DimensionKind, Label};

/// Grid step in degrees along x and y.
pub const DEFAULT_GRID_STEP: f64 = 0.5;

/// Upper bound on generated cells; larger requests are rejected as invalid
/// extents instead of exhausting memory.
const MAX_CELLS: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialExtent {
    pub west: f64,
    pub south: f64,
    pub east: f64,
    pub north: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemporalExtent {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl SpatialExtent {
    pub fn validate(&self) -> Result<(), CubeError> {
        let all_finite = [self.west, self.south, self.east, self.north]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite || self.west >= self.east || self.south >= self.north {
            return Err(CubeError::InvalidExtent(format!(
                "spatial extent must satisfy west < east and south < north, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn bbox(&self) -> [f64; 4] {
        [self.west, self.south, self.east, self.north]
    }
}

impl TemporalExtent {
    /// Parse `[start, end]` date strings; date-times are truncated to dates.
    pub fn parse(start: &str, end: &str) -> Result<Self, CubeError> {
        let day = |s: &str| {
            parse_instant(s)
                .map(|t| t.date())
                .ok_or_else(|| CubeError::InvalidTimestamp(s.to_string()))
        };
        let extent = TemporalExtent {
            start: day(start)?,
            end: day(end)?,
        };
        if extent.start > extent.end {
            return Err(CubeError::InvalidExtent(format!(
                "temporal start {} is after end {}",
                extent.start, extent.end
            )));
        }
        Ok(extent)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Value in `[0, 1)` for one cell.
fn cell_value(seed: u64, indices: [usize; 4]) -> f64 {
    let h = indices
        .iter()
        .fold(seed, |h, &i| splitmix64(h ^ splitmix64(i as u64)));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn axis_cells(lo: f64, hi: f64, step: f64) -> usize {
    (((hi - lo) / step) - 1e-9).ceil().max(1.0) as usize
}

/// Generate a cube with dimensions `x, y, time` plus `bands` when a band
/// list is given. Cell values depend only on the collection id and the cell
/// indices.
pub fn synthetic_cube(
    collection: &str,
    spatial: &SpatialExtent,
    temporal: &TemporalExtent,
    bands: Option<&[String]>,
    grid_step: f64,
) -> Result<DataCube, CubeError> {
    spatial.validate()?;
    if !(grid_step.is_finite() && grid_step > 0.0) {
        return Err(CubeError::InvalidExtent(format!("grid step must be positive, got {grid_step}")));
    }
    if bands.is_some_and(|b| b.is_empty()) {
        return Err(CubeError::EmptyBands);
    }

    let nx = axis_cells(spatial.west, spatial.east, grid_step);
    let ny = axis_cells(spatial.south, spatial.north, grid_step);
    let nt = (temporal.end - temporal.start).num_days() as usize + 1;
    let nb = bands.map_or(1, <[String]>::len);
    let cells = nx
        .checked_mul(ny)
        .and_then(|c| c.checked_mul(nt))
        .and_then(|c| c.checked_mul(nb))
        .filter(|c| *c <= MAX_CELLS)
        .ok_or_else(|| CubeError::InvalidExtent(format!("request exceeds {MAX_CELLS} cells")))?;

    let centers = |lo: f64, n: usize| -> Vec<Label> {
        (0..n).map(|i| Label::Num(lo + (i as f64 + 0.5) * grid_step)).collect()
    };
    let days = (0..nt)
        .map(|d| {
            let date = temporal.start + Days::new(d as u64);
            Label::Str(date.format("%Y-%m-%d").to_string())
        })
        .collect();

    let mut dimensions = vec![
        Dimension::new("x", DimensionKind::Spatial, centers(spatial.west, nx))?,
        Dimension::new("y", DimensionKind::Spatial, centers(spatial.south, ny))?,
        Dimension::new("time", DimensionKind::Temporal, days)?,
    ];
    if let Some(bands) = bands {
        let labels = bands.iter().map(|b| Label::Str(b.clone())).collect();
        dimensions.push(Dimension::new("bands", DimensionKind::Bands, labels)?);
    }

    let seed = fnv1a(collection.as_bytes());
    let mut values = Vec::with_capacity(cells);
    for x in 0..nx {
        for y in 0..ny {
            for t in 0..nt {
                for b in 0..nb {
                    values.push(cell_value(seed, [x, y, t, b]));
                }
            }
        }
    }
    DataCube::new(dimensions, values)
}
