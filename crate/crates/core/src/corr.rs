//! Correlation functions and the matrices built from them.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::SymMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Order-one autoregressive: `phi^|lag|`, with `-1 < phi < 1`.
    Ar1,
    /// `exp(-d^2 / phi)`.
    Gaussian,
    /// `exp(-d / phi)`.
    Exponential,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Ar1 => "ar1",
            Family::Gaussian => "gaussian",
            Family::Exponential => "exponential",
        }
    }

    pub fn phi_is_valid(self, phi: f64) -> bool {
        match self {
            Family::Ar1 => phi > -1.0 && phi < 1.0,
            Family::Gaussian | Family::Exponential => phi > 0.0 && phi.is_finite(),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ar1" => Ok(Family::Ar1),
            "gaussian" => Ok(Family::Gaussian),
            "exponential" => Ok(Family::Exponential),
            other => Err(Error::Usage(format!(
                "unknown correlation family `{other}` (expected ar1, gaussian or exponential)"
            ))),
        }
    }
}

/// A correlation family together with its range/decay parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationModel {
    family: Family,
    phi: f64,
}

impl CorrelationModel {
    pub fn new(family: Family, phi: f64) -> Result<Self> {
        if !family.phi_is_valid(phi) {
            let range = match family {
                Family::Ar1 => "-1 < phi < 1",
                _ => "phi > 0",
            };
            return Err(Error::InvalidInput(format!(
                "phi = {phi} is invalid for {family} correlation ({range})"
            )));
        }
        Ok(CorrelationModel { family, phi })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn with_phi(&self, phi: f64) -> Result<Self> {
        CorrelationModel::new(self.family, phi)
    }

    fn eval(&self, d: f64) -> f64 {
        if d == 0.0 {
            return 1.0;
        }
        match self.family {
            Family::Ar1 if self.phi >= 0.0 || d.fract() == 0.0 => self.phi.powf(d),
            // real part of phi^d, so negative phi stays defined off the integer grid
            Family::Ar1 => self.phi.abs().powf(d) * (std::f64::consts::PI * d).cos(),
            Family::Gaussian => (-(d * d) / self.phi).exp(),
            Family::Exponential => (-d / self.phi).exp(),
        }
    }
}

/// A set of 1-D or 2-D locations stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coordinates {
    dim: usize,
    data: Vec<f64>,
}

impl Coordinates {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput(
                "coordinate dimension must be positive".into(),
            ));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput(format!(
                "{} values cannot be split into {dim}-D points",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("coordinates must be finite".into()));
        }
        Ok(Coordinates { dim, data })
    }

    pub fn from_1d(values: &[f64]) -> Result<Self> {
        Coordinates::new(1, values.to_vec())
    }

    pub fn from_points(points: &[[f64; 2]]) -> Result<Self> {
        Coordinates::new(2, points.iter().flatten().copied().collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// The first coordinate of every point (the axis used for 1-D transforms).
    pub fn first_axis(&self) -> Vec<f64> {
        self.points().map(|p| p[0]).collect()
    }

    pub fn distance(&self, i: usize, other: &Coordinates, j: usize) -> f64 {
        euclidean(self.point(i), other.point(j))
    }

    /// Largest pairwise distance (0 for fewer than two points).
    pub fn max_distance(&self) -> f64 {
        let n = self.len();
        let mut best = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                best = best.max(self.distance(i, self, j));
            }
        }
        best
    }

    /// Per-axis (min, max).
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|k| {
                self.points()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                        (lo.min(p[k]), hi.max(p[k]))
                    })
            })
            .collect()
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, idx: &[usize]) -> Coordinates {
        let data = idx
            .iter()
            .flat_map(|&i| self.point(i).iter().copied())
            .collect();
        Coordinates {
            dim: self.dim,
            data,
        }
    }

    pub fn all_distinct(&self) -> bool {
        let n = self.len();
        (0..n).all(|i| ((i + 1)..n).all(|j| self.point(i) != self.point(j)))
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Correlation at distance (or lag) `d`.
pub fn corr_value(d: f64, model: &CorrelationModel) -> Result<f64> {
    if d.is_nan() || d < 0.0 {
        return Err(Error::InvalidInput(format!(
            "distance must be non-negative, got {d}"
        )));
    }
    Ok(model.eval(d))
}

/// Correlation matrix among `coords`: unit diagonal, exactly symmetric.
pub fn corr_matrix(coords: &Coordinates, model: &CorrelationModel) -> SymMatrix {
    SymMatrix::from_upper_fn(coords.len(), |i, j| {
        if i == j {
            1.0
        } else {
            model.eval(coords.distance(i, coords, j))
        }
    })
}

/// `n x m` correlations between `coords` and `knots`.
pub fn cross_corr_matrix(
    coords: &Coordinates,
    knots: &Coordinates,
    model: &CorrelationModel,
) -> Result<DMatrix<f64>> {
    if coords.dim() != knots.dim() {
        return Err(Error::InvalidInput(format!(
            "points are {}-D but knots are {}-D",
            coords.dim(),
            knots.dim()
        )));
    }
    Ok(DMatrix::from_fn(coords.len(), knots.len(), |i, j| {
        model.eval(coords.distance(i, knots, j))
    }))
}
