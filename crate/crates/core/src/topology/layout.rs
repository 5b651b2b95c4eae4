use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node positions, or a directly supplied pairwise distance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeLayout {
    Coords(Vec<Vec<f64>>),
    Distances(Vec<Vec<f64>>),
}

impl NodeLayout {
    /// `rows x cols` grid with unit spacing; node `r * cols + c` sits at
    /// `(c, r)`.
    pub fn grid(rows: usize, cols: usize) -> Self {
        let mut coords = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                coords.push(vec![c as f64, r as f64]);
            }
        }
        Self::Coords(coords)
    }

    /// `n` nodes evenly spaced on the unit circle, node 0 at angle 0.
    pub fn ring(n: usize) -> Self {
        let coords = (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                vec![a.cos(), a.sin()]
            })
            .collect();
        Self::Coords(coords)
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Coords(c) => c.len(),
            Self::Distances(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        match self {
            Self::Coords(c) => Some(c),
            Self::Distances(_) => None,
        }
    }
}

/// Symmetric, zero-diagonal, nonnegative `n x n` distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistanceRecord", into = "DistanceRecord")]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
    normalized: bool,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.n.max(1)).map(<[f64]>::to_vec).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct DistanceRecord {
    normalized: bool,
    rows: Vec<Vec<f64>>,
}

impl From<DistanceMatrix> for DistanceRecord {
    fn from(d: DistanceMatrix) -> Self {
        Self {
            normalized: d.normalized,
            rows: d.rows(),
        }
    }
}

impl TryFrom<DistanceRecord> for DistanceMatrix {
    type Error = Error;

    fn try_from(r: DistanceRecord) -> Result<Self> {
        let d = build_distance_matrix(&NodeLayout::Distances(r.rows), false)?;
        Ok(Self {
            normalized: r.normalized,
            ..d
        })
    }
}

/// Euclidean pairwise distances, optionally rescaled so the largest is 1.
pub fn build_distance_matrix(layout: &NodeLayout, normalize: bool) -> Result<DistanceMatrix> {
    let n = layout.len();
    if n == 0 {
        return Err(Error::Parameter("layout needs at least one node".into()));
    }
    let mut values = vec![0.0; n * n];
    match layout {
        NodeLayout::Coords(coords) => {
            let dim = coords[0].len();
            if dim == 0 || coords.iter().any(|c| c.len() != dim || c.iter().any(|v| !v.is_finite())) {
                return Err(Error::Parameter(
                    "coordinates must be finite and share one dimension".into(),
                ));
            }
            for i in 0..n {
                for j in 0..n {
                    let d2: f64 = coords[i]
                        .iter()
                        .zip(&coords[j])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    values[i * n + j] = d2.sqrt();
                }
            }
        }
        NodeLayout::Distances(rows) => {
            if rows.iter().any(|r| r.len() != n) {
                return Err(Error::Parameter("distance matrix must be square".into()));
            }
            for i in 0..n {
                for j in 0..n {
                    let (a, b) = (rows[i][j], rows[j][i]);
                    if !(a >= 0.0 && a.is_finite()) || (a - b).abs() > 1e-12 * a.max(b).max(1.0) {
                        return Err(Error::Parameter(format!(
                            "distance matrix must be finite, nonnegative and symmetric (entry {i},{j})"
                        )));
                    }
                    if i == j && a != 0.0 {
                        return Err(Error::Parameter("distance matrix diagonal must be zero".into()));
                    }
                    values[i * n + j] = if i <= j { a } else { rows[j][i] };
                }
            }
        }
    }
    if normalize {
        let max = values.iter().copied().fold(0.0, f64::max);
        if max == 0.0 {
            return Err(Error::DegenerateGeometry(
                "all nodes coincide; cannot normalize".into(),
            ));
        }
        values.iter_mut().for_each(|v| *v /= max);
    }
    Ok(DistanceMatrix {
        n,
        values,
        normalized: normalize,
    })
}
