use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::domain::{MatrixField, RealField, SurfaceDomain};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_apply, hermitian_eigenvalues, CMat};

/// Positive-definite Hermitian metric with unit determinant at every node.
#[derive(Clone, Debug, PartialEq)]
pub enum HermitianMetricField {
    /// `H = diag(e^{2 u_1}, ..., e^{2 u_n})` with `sum u_j = 0`.
    Diagonal(Vec<RealField>),
    /// `H = exp(S)`, `S` Hermitian and traceless.
    Full(MatrixField),
}

impl HermitianMetricField {
    pub fn identity_diagonal(domain: SurfaceDomain, n: usize) -> Self {
        Self::Diagonal(vec![RealField::constant(domain, 0.0); n])
    }

    pub fn identity_full(domain: SurfaceDomain, n: usize) -> Self {
        Self::Full(MatrixField::constant(domain, CMat::zeros(n, n)))
    }

    /// Builds a diagonal metric, projecting the exponents to zero sum.
    pub fn diagonal(mut u: Vec<RealField>) -> Result<Self> {
        let Some(first) = u.first() else {
            return Err(Error::DimensionMismatch("no exponent fields".into()));
        };
        let domain = first.domain;
        for f in &u {
            f.check_same_domain(first)?;
        }
        let n = u.len() as f64;
        for node in 0..domain.node_count() {
            let mean = u.iter().map(|f| f.values[node]).sum::<f64>() / n;
            for f in u.iter_mut() {
                f.values[node] -= mean;
            }
        }
        Ok(Self::Diagonal(u))
    }

    /// Builds a full metric from `S`, projecting to Hermitian traceless.
    pub fn full(s: MatrixField) -> Self {
        Self::Full(s.map(project_hermitian_traceless))
    }

    /// Accepts explicit metric matrices; rejects the first node that is not
    /// Hermitian positive definite. The determinant is normalized to one.
    pub fn from_matrices(h: &MatrixField) -> Result<Self> {
        let mut s = Vec::with_capacity(h.values.len());
        for (node, m) in h.values.iter().enumerate() {
            let herm_err = crate::linalg::max_abs(&(m - m.adjoint()));
            let eig = hermitian_eigenvalues(m);
            if herm_err > 1e-10 * crate::linalg::max_abs(m).max(1.0) || eig[0] <= 0.0 {
                return Err(Error::NotPositiveDefinite { node });
            }
            s.push(project_hermitian_traceless(&hermitian_apply(m, f64::ln)));
        }
        Ok(Self::Full(MatrixField::new(h.domain, s)?))
    }

    pub fn domain(&self) -> SurfaceDomain {
        match self {
            Self::Diagonal(u) => u[0].domain,
            Self::Full(s) => s.domain,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Diagonal(u) => u.len(),
            Self::Full(s) => s.dim(),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self, Self::Diagonal(_))
    }

    /// `H^p` at one node for real `p` (`p = 1` metric, `-1` inverse, `1/2` root).
    pub fn power_at(&self, node: usize, p: f64) -> CMat {
        match self {
            Self::Diagonal(u) => {
                let n = u.len();
                let mut m = CMat::zeros(n, n);
                for (j, f) in u.iter().enumerate() {
                    m[(j, j)] = Complex64::new((2.0 * p * f.values[node]).exp(), 0.0);
                }
                m
            }
            Self::Full(s) => hermitian_apply(&s.values[node], |x| (p * x).exp()),
        }
    }

    pub fn power(&self, p: f64) -> MatrixField {
        MatrixField::from_fn(self.domain(), |node| self.power_at(node, p))
    }

    pub fn matrices(&self) -> MatrixField {
        self.power(1.0)
    }

    /// Converts to the full representation.
    pub fn to_full(&self) -> Self {
        match self {
            Self::Diagonal(u) => {
                let n = u.len();
                Self::Full(MatrixField::from_fn(self.domain(), |node| {
                    DMatrix::from_fn(n, n, |i, j| {
                        if i == j {
                            Complex64::new(2.0 * u[i].values[node], 0.0)
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                }))
            }
            Self::Full(_) => self.clone(),
        }
    }

    /// Log-metric `S` with `H = exp(S)` (diagonal: `2 u_j`).
    pub fn log_matrices(&self) -> MatrixField {
        match self.to_full() {
            Self::Full(s) => s,
            Self::Diagonal(_) => unreachable!(),
        }
    }

    /// Largest `|det H - 1|` and smallest eigenvalue of `H` over the grid.
    pub fn determinant_check(&self) -> (f64, f64) {
        let h = self.matrices();
        let mut det_err = 0.0f64;
        let mut min_eig = f64::INFINITY;
        for m in &h.values {
            let eig = hermitian_eigenvalues(m);
            let det: f64 = eig.iter().product();
            det_err = det_err.max((det - 1.0).abs());
            min_eig = min_eig.min(eig[0]);
        }
        (det_err, min_eig)
    }

    /// Max over nodes of the largest off-diagonal modulus of `H`.
    pub fn off_diagonal_sup(&self) -> f64 {
        match self {
            Self::Diagonal(_) => 0.0,
            Self::Full(_) => {
                let h = self.matrices();
                let mut worst = 0.0f64;
                for m in &h.values {
                    for i in 0..m.nrows() {
                        for j in 0..m.ncols() {
                            if i != j {
                                worst = worst.max(m[(i, j)].norm());
                            }
                        }
                    }
                }
                worst
            }
        }
    }

    /// Largest entrywise deviation of `H` from the identity.
    pub fn deviation_from_identity(&self) -> f64 {
        let h = self.matrices();
        let n = self.dim();
        h.values
            .iter()
            .map(|m| crate::linalg::max_abs(&(m - CMat::identity(n, n))))
            .fold(0.0, f64::max)
    }

    /// Largest entrywise distance between two metrics.
    pub fn distance(&self, other: &Self) -> f64 {
        let a = self.matrices();
        let b = other.matrices();
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| crate::linalg::max_abs(&(x - y)))
            .fold(0.0, f64::max)
    }
}

pub fn project_hermitian_traceless(m: &CMat) -> CMat {
    let n = m.nrows();
    let mut h = (m + m.adjoint()).scale(0.5);
    let tr = crate::linalg::trace(&h) / n as f64;
    for i in 0..n {
        h[(i, i)] -= tr;
    }
    h
}
