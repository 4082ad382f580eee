use crate::error::{Error, Result};

/// A point of the state space: a finite real vector, optionally split into a
/// pair `(x, y)` for paired spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
    split: Option<usize>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::domain("point must have at least one coordinate"));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::domain(format!("non-finite coordinate {bad}")));
        }
        Ok(Point {
            coords,
            split: None,
        })
    }

    /// One-dimensional point.
    ///
    /// Panics if `x` is not finite.
    pub fn scalar(x: f64) -> Self {
        assert!(x.is_finite(), "non-finite coordinate {x}");
        Point {
            coords: vec![x],
            split: None,
        }
    }

    pub fn pair(x: Point, y: Point) -> Self {
        let split = x.coords.len();
        let mut coords = x.coords;
        coords.extend(y.coords);
        Point {
            coords,
            split: Some(split),
        }
    }

    /// Pair point from raw coordinates; `split` is the dimension of the first part.
    pub fn with_split(coords: Vec<f64>, split: usize) -> Result<Self> {
        if split == 0 || split >= coords.len() {
            return Err(Error::domain(format!(
                "pair split {split} invalid for dimension {}",
                coords.len()
            )));
        }
        let mut p = Point::new(coords)?;
        p.split = Some(split);
        Ok(p)
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Convenience for one-dimensional points.
    #[inline]
    pub fn value(&self) -> f64 {
        self.coords[0]
    }

    pub fn split(&self) -> Option<usize> {
        self.split
    }

    /// First component of a pair, or the whole point.
    #[inline]
    pub fn x(&self) -> &[f64] {
        match self.split {
            Some(s) => &self.coords[..s],
            None => &self.coords,
        }
    }

    /// Second component of a pair.
    #[inline]
    pub fn y(&self) -> Option<&[f64]> {
        self.split.map(|s| &self.coords[s..])
    }
}

/// Distance on raw coordinate slices of equal length.
pub type Metric = fn(&[f64], &[f64]) -> f64;

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() == 1 {
        return (a[0] - b[0]).abs();
    }
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v) * (u - v))
        .sum::<f64>()
        .sqrt()
}

pub fn euclidean_distance(a: &Point, b: &Point) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::domain(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(euclidean(a.coords(), b.coords()))
}

/// A finite trajectory `X_1, ..., X_n` with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    points: Vec<Point>,
    pub seed: u64,
    pub latent_component: Option<usize>,
    pub process_id: String,
}

impl SamplePath {
    pub fn new(
        points: Vec<Point>,
        seed: u64,
        latent_component: Option<usize>,
        process_id: impl Into<String>,
    ) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::domain("sample path must contain at least one point"))?;
        let (dim, split) = (first.dim(), first.split());
        if let Some((i, _)) = points
            .iter()
            .enumerate()
            .find(|(_, p)| p.dim() != dim || p.split() != split)
        {
            return Err(Error::domain(format!(
                "point {} does not match the path dimension {dim}",
                i + 1
            )));
        }
        Ok(SamplePath {
            points,
            seed,
            latent_component,
            process_id: process_id.into(),
        })
    }

    /// Path of one-dimensional points with no provenance.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        let points = values
            .iter()
            .map(|&v| Point::new(vec![v]))
            .collect::<Result<Vec<_>>>()?;
        SamplePath::new(points, 0, None, "inline")
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn split(&self) -> Option<usize> {
        self.points[0].split()
    }

    /// The first `n` points, keeping provenance.
    pub fn prefix(&self, n: usize) -> Result<SamplePath> {
        if n == 0 || n > self.len() {
            return Err(Error::domain(format!(
                "prefix length {n} outside 1..={}",
                self.len()
            )));
        }
        Ok(SamplePath {
            points: self.points[..n].to_vec(),
            seed: self.seed,
            latent_component: self.latent_component,
            process_id: self.process_id.clone(),
        })
    }
}
