//! Discretized coordinate domains and the fields that live on them.
//!
//! Two backends:
//!
//! * [`Shape::Torus`]: the flat torus `C / (Z + tau Z)` sampled on an `N x N`
//!   lattice grid, differentiated spectrally.
//! * [`Shape::Patch`]: the square `[-L, L]^2` sampled on `(N+1) x (N+1)`
//!   nodes including the boundary ring, differentiated with 4th-order
//!   finite differences.
//!
//! Fields are stored row-major; the row index follows the second lattice
//! direction (`t` on the torus, `y` on the patch).

mod ops;
mod poisson;
pub mod snapshot;

pub use ops::DiffOps;
pub use poisson::ShiftedPoisson;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pairwise_sum, CMat};

pub const MIN_RESOLUTION: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    /// Lattice `Z + tau Z`, `Im tau > 0`.
    Torus { tau: Complex64 },
    /// Square `[-L, L]^2`.
    Patch { half_width: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceDomain {
    pub shape: Shape,
    /// Grid resolution per axis.
    pub resolution: usize,
}

impl SurfaceDomain {
    pub fn torus(resolution: usize, tau: Complex64) -> Result<Self> {
        if resolution < MIN_RESOLUTION || !resolution.is_power_of_two() {
            return Err(Error::InvalidDomain(format!(
                "torus resolution must be a power of two >= {MIN_RESOLUTION}, got {resolution}"
            )));
        }
        if !(tau.im > 0.0) || !tau.re.is_finite() || !tau.im.is_finite() {
            return Err(Error::InvalidDomain(format!(
                "torus modulus must satisfy Im tau > 0, got {tau}"
            )));
        }
        Ok(Self {
            shape: Shape::Torus { tau },
            resolution,
        })
    }

    /// Square torus `tau = i`.
    pub fn square_torus(resolution: usize) -> Result<Self> {
        Self::torus(resolution, Complex64::new(0.0, 1.0))
    }

    pub fn patch(resolution: usize, half_width: f64) -> Result<Self> {
        if resolution < MIN_RESOLUTION || !resolution.is_multiple_of(2) {
            return Err(Error::InvalidDomain(format!(
                "patch resolution must be even and >= {MIN_RESOLUTION}, got {resolution}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidDomain(format!(
                "patch half-width must be positive, got {half_width}"
            )));
        }
        Ok(Self {
            shape: Shape::Patch { half_width },
            resolution,
        })
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.shape, Shape::Torus { .. })
    }

    /// Nodes per axis: `N` on the torus, `N + 1` on the patch.
    pub fn side(&self) -> usize {
        match self.shape {
            Shape::Torus { .. } => self.resolution,
            Shape::Patch { .. } => self.resolution + 1,
        }
    }

    pub fn node_count(&self) -> usize {
        self.side() * self.side()
    }

    /// `(row, col)` of a node index.
    pub fn row_col(&self, node: usize) -> (usize, usize) {
        (node / self.side(), node % self.side())
    }

    /// Complex coordinate `z` of a node.
    pub fn coord(&self, node: usize) -> Complex64 {
        let (row, col) = self.row_col(node);
        match self.shape {
            Shape::Torus { tau } => {
                let s = col as f64 / self.resolution as f64;
                let t = row as f64 / self.resolution as f64;
                Complex64::new(s, 0.0) + tau * t
            }
            Shape::Patch { half_width } => {
                let h = self.spacing();
                Complex64::new(-half_width + col as f64 * h, -half_width + row as f64 * h)
            }
        }
    }

    /// Lattice coordinates `(s, t)` on the torus, `(x, y)` on the patch.
    pub fn grid_coords(&self, node: usize) -> (f64, f64) {
        let (row, col) = self.row_col(node);
        match self.shape {
            Shape::Torus { .. } => (
                col as f64 / self.resolution as f64,
                row as f64 / self.resolution as f64,
            ),
            Shape::Patch { .. } => {
                let z = self.coord(node);
                (z.re, z.im)
            }
        }
    }

    /// Step in each lattice direction.
    pub fn spacing(&self) -> f64 {
        match self.shape {
            Shape::Torus { .. } => 1.0 / self.resolution as f64,
            Shape::Patch { half_width } => 2.0 * half_width / self.resolution as f64,
        }
    }

    /// Total coordinate area.
    pub fn area(&self) -> f64 {
        match self.shape {
            Shape::Torus { tau } => tau.im,
            Shape::Patch { half_width } => 4.0 * half_width * half_width,
        }
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        match self.shape {
            Shape::Torus { .. } => false,
            Shape::Patch { .. } => {
                let (r, c) = self.row_col(node);
                let last = self.resolution;
                r == 0 || c == 0 || r == last || c == last
            }
        }
    }

    /// Nodes excluding the patch boundary ring (all nodes on the torus).
    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.node_count())
            .filter(|i| !self.is_boundary(*i))
            .collect()
    }

    /// Nodes whose coordinates lie in the centered square of half-width
    /// `fraction * L` (patch only; the whole torus otherwise).
    pub fn window_nodes(&self, fraction: f64) -> Vec<usize> {
        match self.shape {
            Shape::Torus { .. } => (0..self.node_count()).collect(),
            Shape::Patch { half_width } => {
                let w = fraction * half_width + 1e-12;
                (0..self.node_count())
                    .filter(|i| {
                        let z = self.coord(*i);
                        z.re.abs() <= w && z.im.abs() <= w
                    })
                    .collect()
            }
        }
    }

    /// Quadrature weights (area per node) used by [`integrate`].
    ///
    /// Torus: equal weights `area / N^2`. Patch: tensor-product Simpson rule.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        match self.shape {
            Shape::Torus { .. } => {
                vec![self.area() / self.node_count() as f64; self.node_count()]
            }
            Shape::Patch { .. } => {
                let n = self.resolution;
                let h = self.spacing();
                let w1: Vec<f64> = (0..=n)
                    .map(|i| {
                        let base = if i == 0 || i == n {
                            1.0
                        } else if i % 2 == 1 {
                            4.0
                        } else {
                            2.0
                        };
                        base * h / 3.0
                    })
                    .collect();
                let mut w = Vec::with_capacity(self.node_count());
                for wr in &w1 {
                    for wc in &w1 {
                        w.push(wr * wc);
                    }
                }
                w
            }
        }
    }
}

/// Samples of a value type at every node of a domain.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField<T> {
    pub domain: SurfaceDomain,
    pub values: Vec<T>,
}

pub type ScalarField = GridField<Complex64>;
pub type RealField = GridField<f64>;
pub type MatrixField = GridField<CMat>;

impl<T: Clone> GridField<T> {
    pub fn new(domain: SurfaceDomain, values: Vec<T>) -> Result<Self> {
        if values.len() != domain.node_count() {
            return Err(Error::DimensionMismatch(format!(
                "field has {} values, domain expects {}",
                values.len(),
                domain.node_count()
            )));
        }
        Ok(Self { domain, values })
    }

    pub fn constant(domain: SurfaceDomain, value: T) -> Self {
        Self {
            domain,
            values: vec![value; domain.node_count()],
        }
    }

    pub fn from_fn(domain: SurfaceDomain, f: impl Fn(usize) -> T + Sync + Send) -> Self
    where
        T: Send,
    {
        use rayon::prelude::*;
        let values = (0..domain.node_count()).into_par_iter().map(f).collect();
        Self { domain, values }
    }

    pub fn map<U: Send>(&self, f: impl Fn(&T) -> U + Sync + Send) -> GridField<U>
    where
        T: Sync,
    {
        use rayon::prelude::*;
        GridField {
            domain: self.domain,
            values: self.values.par_iter().map(f).collect(),
        }
    }

    pub fn check_same_domain<U>(&self, other: &GridField<U>) -> Result<()> {
        if self.domain != other.domain {
            return Err(Error::DomainMismatch);
        }
        Ok(())
    }
}

impl ScalarField {
    pub fn re(&self) -> RealField {
        self.map(|z| z.re)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl RealField {
    pub fn to_complex(&self) -> ScalarField {
        self.map(|x| Complex64::new(*x, 0.0))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }
}

impl MatrixField {
    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, DMatrix::nrows)
    }

    /// Scalar field of entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> ScalarField {
        self.map(|m| m[(i, j)])
    }

    /// Reassembles a matrix field from `dim * dim` entry planes (row-major).
    pub fn from_entries(domain: SurfaceDomain, dim: usize, planes: &[ScalarField]) -> Self {
        assert_eq!(planes.len(), dim * dim);
        Self::from_fn(domain, |node| {
            DMatrix::from_fn(dim, dim, |i, j| planes[i * dim + j].values[node])
        })
    }

    /// Applies a linear scalar operator entrywise.
    pub fn map_entries(
        &self,
        op: impl Fn(&ScalarField) -> Result<ScalarField>,
    ) -> Result<Self> {
        let d = self.dim();
        let mut planes = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                planes.push(op(&self.entry(i, j))?);
            }
        }
        Ok(Self::from_entries(self.domain, d, &planes))
    }

    /// Pointwise binary operation.
    pub fn zip_with(
        &self,
        other: &MatrixField,
        f: impl Fn(&CMat, &CMat) -> CMat + Sync + Send,
    ) -> Result<MatrixField> {
        self.check_same_domain(other)?;
        Ok(Self::from_fn(self.domain, |i| {
            f(&self.values[i], &other.values[i])
        }))
    }

    /// Largest per-node Frobenius norm.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .map(crate::linalg::frobenius)
            .fold(0.0, f64::max)
    }
}

/// Quadrature of `f * weight` over the domain.
///
/// `weight` is the area density relative to the flat coordinate measure
/// (a conformal factor, `sqrt(det g)`, or ones). Summation order is fixed.
pub fn integrate(f: &RealField, weight: &RealField) -> Result<f64> {
    f.check_same_domain(weight)?;
    let q = f.domain.quadrature_weights();
    let terms: Vec<f64> = f
        .values
        .iter()
        .zip(&weight.values)
        .zip(&q)
        .map(|((a, b), w)| a * b * w)
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Quadrature restricted to a node subset (other weights treated as zero).
pub fn integrate_over(f: &RealField, weight: &RealField, nodes: &[usize]) -> Result<f64> {
    f.check_same_domain(weight)?;
    let q = f.domain.quadrature_weights();
    let terms: Vec<f64> = nodes
        .iter()
        .map(|&i| f.values[i] * weight.values[i] * q[i])
        .collect();
    Ok(pairwise_sum(&terms))
}
