use chrono::{DateTime, NaiveDate, NaiveDateTime};

use super::{CubeError, DataCube, Dimension, DimensionKind, Label};

/// Accepts `YYYY-MM-DD` or an RFC 3339 date-time.
pub(crate) fn parse_instant(s: &str) -> Option<NaiveDateTime> {
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return d.and_hms_opt(0, 0, 0);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc());
    }
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S").ok()
}

impl DataCube {
    /// (elements before, size, elements after) around dimension `axis`.
    fn split_at_axis(&self, axis: usize) -> (usize, usize, usize) {
        let shape = self.shape();
        let outer = shape[..axis].iter().product();
        let inner = shape[axis + 1..].iter().product();
        (outer, shape[axis], inner)
    }

    /// Keep the given indices (in the given order) along one dimension.
    fn select(&self, axis: usize, keep: &[usize]) -> Result<DataCube, CubeError> {
        let (outer, size, inner) = self.split_at_axis(axis);
        let mut values = Vec::with_capacity(outer * keep.len() * inner);
        for o in 0..outer {
            for &k in keep {
                let start = (o * size + k) * inner;
                values.extend_from_slice(&self.values[start..start + inner]);
            }
        }
        let old = &self.dimensions[axis];
        let labels = keep.iter().map(|&k| old.labels[k].clone()).collect();
        let mut dimensions = self.dimensions.clone();
        dimensions[axis] = Dimension::new(old.name.clone(), old.kind, labels)?;
        DataCube::new(dimensions, values)
    }

    fn axis_of_kind(&self, kind: DimensionKind) -> Option<usize> {
        self.dimensions.iter().position(|d| d.kind == kind)
    }

    pub fn filter_bands(&self, bands: &[String]) -> Result<DataCube, CubeError> {
        let axis = self.axis_of_kind(DimensionKind::Bands).ok_or(CubeError::NoBandsDimension)?;
        let dim = &self.dimensions[axis];
        let keep = bands
            .iter()
            .map(|b| {
                dim.labels
                    .iter()
                    .position(|l| l.as_str() == Some(b))
                    .ok_or_else(|| CubeError::UnknownBand(b.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.select(axis, &keep)
    }

    /// Restrict the temporal dimension to `start <= t < end`. `None` leaves
    /// that side open.
    pub fn filter_temporal(&self, start: Option<&str>, end: Option<&str>) -> Result<DataCube, CubeError> {
        let axis = self
            .axis_of_kind(DimensionKind::Temporal)
            .ok_or(CubeError::NoTemporalDimension)?;
        let parse = |s: &str| parse_instant(s).ok_or_else(|| CubeError::InvalidTimestamp(s.to_string()));
        let start = start.map(parse).transpose()?;
        let end = end.map(parse).transpose()?;
        if let (Some(s), Some(e)) = (start, end) {
            if s > e {
                return Err(CubeError::InvalidExtent(format!("temporal start {s} is after end {e}")));
            }
        }
        let mut keep = Vec::new();
        for (k, label) in self.dimensions[axis].labels.iter().enumerate() {
            let text = label.to_string();
            let t = parse(&text)?;
            if start.is_none_or(|s| t >= s) && end.is_none_or(|e| t < e) {
                keep.push(k);
            }
        }
        self.select(axis, &keep)
    }

    /// Collapse one dimension by applying `reducer` to every 1-D slice.
    pub fn reduce<E, F>(&self, dimension: &str, mut reducer: F) -> Result<DataCube, E>
    where
        F: FnMut(&[f64]) -> Result<f64, E>,
        E: From<CubeError>,
    {
        let axis = self
            .dimension_index(dimension)
            .ok_or_else(|| CubeError::UnknownDimension(dimension.to_string()))?;
        let (outer, size, inner) = self.split_at_axis(axis);
        let mut slice = Vec::with_capacity(size);
        let mut values = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            for i in 0..inner {
                slice.clear();
                slice.extend((0..size).map(|k| self.values[(o * size + k) * inner + i]));
                values.push(reducer(&slice)?);
            }
        }
        let mut dimensions = self.dimensions.clone();
        dimensions.remove(axis);
        Ok(DataCube::new(dimensions, values)?)
    }

    /// Same dimensions, every value replaced by `f(value)`.
    pub fn try_map<E, F>(&self, f: F) -> Result<DataCube, E>
    where
        F: FnMut(f64) -> Result<f64, E>,
    {
        let values = self.values.iter().copied().map(f).collect::<Result<Vec<_>, E>>()?;
        Ok(DataCube {
            dimensions: self.dimensions.clone(),
            values,
        })
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> DataCube {
        self.try_map::<std::convert::Infallible, _>(|v| Ok(f(v)))
            .unwrap_or_else(|never| match never {})
    }

    /// Elementwise combination of two cubes with identical dimensions.
    pub fn zip_with(&self, other: &DataCube, mut f: impl FnMut(f64, f64) -> f64) -> Result<DataCube, CubeError> {
        if self.dimensions != other.dimensions {
            return Err(CubeError::ShapeMismatch {
                expected: self.values.len(),
                actual: other.values.len(),
            });
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect();
        Ok(DataCube {
            dimensions: self.dimensions.clone(),
            values,
        })
    }

    /// Append a new size-1 dimension.
    pub fn add_dimension(&self, name: &str, label: Label, kind: DimensionKind) -> Result<DataCube, CubeError> {
        if self.dimension(name).is_some() {
            return Err(CubeError::DimensionExists(name.to_string()));
        }
        let mut dimensions = self.dimensions.clone();
        dimensions.push(Dimension::new(name, kind, vec![label])?);
        DataCube::new(dimensions, self.values.clone())
    }

    /// Normalized difference `(nir - red) / (nir + red)` as a single band
    /// named `ndvi`.
    pub fn ndvi(&self, nir: &str, red: &str) -> Result<DataCube, CubeError> {
        let axis = self.axis_of_kind(DimensionKind::Bands).ok_or(CubeError::NoBandsDimension)?;
        let name = self.dimensions[axis].name.clone();
        let nir = self.filter_bands(&[nir.to_string()])?;
        let red = self.filter_bands(&[red.to_string()])?;
        let values = nir
            .values
            .iter()
            .zip(&red.values)
            .map(|(n, r)| (n - r) / (n + r))
            .collect();
        let mut dimensions = nir.dimensions;
        dimensions[axis] = Dimension::new(name, DimensionKind::Bands, vec!["ndvi".into()])?;
        DataCube::new(dimensions, values)
    }
}
