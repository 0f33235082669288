//! Hitchin-section Higgs fields `phi = e_{-1} + sum_k alpha_k e_k` on a grid.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{DiffOps, MatrixField, RealField, ScalarField, Shape, SurfaceDomain};
use crate::error::{Error, Result};
use crate::lie::LieBasis;
use crate::linalg::{c, trace, CMat, I};
use crate::solver::HermitianMetricField;

pub const MAX_POLY_DEGREE: usize = 8;

/// One term `coeff * exp(2 pi i (ms s + mt t))` in lattice coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierMode {
    pub ms: i32,
    pub mt: i32,
    pub coeff: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Constant(Complex64),
    /// Coefficients of `1, z, z^2, ...` (Patch only).
    Polynomial(Vec<Complex64>),
    /// Trigonometric data on the torus; holomorphic only when constant.
    Fourier(Vec<FourierMode>),
}

/// `alpha_k`, a section of `K^{k+1}` written in the global trivialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Differential {
    pub k: usize,
    pub profile: Profile,
}

impl Differential {
    pub fn constant(k: usize, value: Complex64) -> Self {
        Self {
            k,
            profile: Profile::Constant(value),
        }
    }

    pub fn polynomial(k: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() > MAX_POLY_DEGREE + 1 {
            return Err(Error::InvalidDifferential(format!(
                "alpha_{k}: polynomial degree {} exceeds {MAX_POLY_DEGREE}",
                coeffs.len() - 1
            )));
        }
        Ok(Self {
            k,
            profile: Profile::Polynomial(coeffs),
        })
    }

    pub fn fourier(k: usize, modes: Vec<FourierMode>) -> Self {
        Self {
            k,
            profile: Profile::Fourier(modes),
        }
    }

    pub fn is_zero(&self) -> bool {
        let zero = |z: &Complex64| *z == c(0.0, 0.0);
        match &self.profile {
            Profile::Constant(v) => zero(v),
            Profile::Polynomial(cs) => cs.iter().all(zero),
            Profile::Fourier(ms) => ms.iter().all(|m| zero(&m.coeff)),
        }
    }

    /// True for data that is not holomorphic by construction.
    pub fn is_synthetic(&self) -> bool {
        match &self.profile {
            Profile::Fourier(ms) => ms.iter().any(|m| (m.ms, m.mt) != (0, 0) && m.coeff != c(0.0, 0.0)),
            _ => false,
        }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let profile = match &self.profile {
            Profile::Constant(v) => Profile::Constant(v * factor),
            Profile::Polynomial(cs) => Profile::Polynomial(cs.iter().map(|z| z * factor).collect()),
            Profile::Fourier(ms) => Profile::Fourier(
                ms.iter()
                    .map(|m| FourierMode {
                        coeff: m.coeff * factor,
                        ..*m
                    })
                    .collect(),
            ),
        };
        Self { k: self.k, profile }
    }

    pub fn evaluate(&self, domain: &SurfaceDomain) -> Result<ScalarField> {
        match (&self.profile, domain.shape) {
            (Profile::Constant(v), _) => Ok(ScalarField::constant(*domain, *v)),
            (Profile::Polynomial(cs), Shape::Patch { .. }) => {
                let cs = cs.clone();
                Ok(ScalarField::from_fn(*domain, move |node| {
                    let z = domain.coord(node);
                    cs.iter().rev().fold(c(0.0, 0.0), |acc, a| acc * z + a)
                }))
            }
            (Profile::Fourier(ms), Shape::Torus { .. }) => {
                let ms = ms.clone();
                Ok(ScalarField::from_fn(*domain, move |node| {
                    let (s, t) = domain.grid_coords(node);
                    ms.iter()
                        .map(|m| m.coeff * (I * 2.0 * PI * (m.ms as f64 * s + m.mt as f64 * t)).exp())
                        .sum()
                }))
            }
            (Profile::Polynomial(_), Shape::Torus { .. }) => Err(Error::InvalidDifferential(format!(
                "alpha_{}: polynomials are not periodic; use a constant on the torus",
                self.k
            ))),
            (Profile::Fourier(_), Shape::Patch { .. }) => Err(Error::InvalidDifferential(format!(
                "alpha_{}: Fourier data is only defined on the torus",
                self.k
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    HitchinSection,
    /// Arbitrary matrix data, e.g. after the raw circle action.
    Raw,
}

#[derive(Clone, Debug)]
pub struct HiggsField {
    pub basis: LieBasis,
    /// Sorted by `k`; missing indices are zero.
    pub alphas: Vec<Differential>,
    pub phi: MatrixField,
    pub origin: Origin,
}

pub fn build_hitchin_higgs(
    basis: &LieBasis,
    alphas: &[Differential],
    domain: &SurfaceDomain,
) -> Result<HiggsField> {
    let n = basis.n;
    let mut sorted = alphas.to_vec();
    sorted.sort_by_key(|a| a.k);
    for (i, a) in sorted.iter().enumerate() {
        if a.k == 0 || a.k >= n {
            return Err(Error::InvalidDifferential(format!(
                "index k = {} outside 1..={} for n = {n}",
                a.k,
                n - 1
            )));
        }
        if i > 0 && sorted[i - 1].k == a.k {
            return Err(Error::InvalidDifferential(format!("duplicate index k = {}", a.k)));
        }
    }
    let samples = sorted
        .iter()
        .map(|a| a.evaluate(domain))
        .collect::<Result<Vec<_>>>()?;
    let phi = MatrixField::from_fn(*domain, |node| {
        let mut m = basis.em1.clone();
        for (a, f) in sorted.iter().zip(&samples) {
            m += basis.e(a.k).map(|x| x * f.values[node]);
        }
        m
    });
    Ok(HiggsField {
        basis: basis.clone(),
        alphas: sorted,
        phi,
        origin: Origin::HitchinSection,
    })
}

impl HiggsField {
    /// Wraps arbitrary matrix data (no normal-form guarantees).
    pub fn raw(basis: &LieBasis, phi: MatrixField) -> Result<Self> {
        if phi.dim() != basis.n {
            return Err(Error::DimensionMismatch(format!(
                "phi is {0}x{0} but the basis has n = {1}",
                phi.dim(),
                basis.n
            )));
        }
        Ok(Self {
            basis: basis.clone(),
            alphas: Vec::new(),
            phi,
            origin: Origin::Raw,
        })
    }

    pub fn n(&self) -> usize {
        self.basis.n
    }

    pub fn domain(&self) -> SurfaceDomain {
        self.phi.domain
    }

    pub fn alpha(&self, k: usize) -> Option<&Differential> {
        self.alphas.iter().find(|a| a.k == k)
    }

    pub fn alpha_field(&self, k: usize) -> Result<ScalarField> {
        match self.alpha(k) {
            Some(a) => a.evaluate(&self.domain()),
            None => Ok(ScalarField::constant(self.domain(), c(0.0, 0.0))),
        }
    }

    fn nonzero(&self) -> impl Iterator<Item = &Differential> {
        self.alphas.iter().filter(|a| !a.is_zero())
    }

    /// Hitchin section with every differential zero.
    pub fn is_fuchsian(&self) -> bool {
        self.origin == Origin::HitchinSection && self.nonzero().next().is_none()
    }

    /// Hitchin section whose only nonzero differential is the top one.
    pub fn is_cyclic(&self) -> bool {
        self.origin == Origin::HitchinSection && self.nonzero().all(|a| a.k == self.n() - 1)
    }

    /// True when the configured `alpha_1` vanishes identically.
    pub fn is_conformal_input(&self) -> bool {
        self.origin == Origin::HitchinSection && self.alpha(1).is_none_or(Differential::is_zero)
    }

    pub fn is_synthetic(&self) -> bool {
        self.origin == Origin::Raw || self.alphas.iter().any(Differential::is_synthetic)
    }

    /// Coefficient of `phi(node)` along `e_{-1}` in the weight decomposition.
    pub fn em1_component(&self, node: usize) -> Complex64 {
        let em1 = &self.basis.em1;
        let num: Complex64 = self.phi.values[node]
            .iter()
            .zip(em1.iter())
            .map(|(a, b)| a * b.conj())
            .sum();
        num / em1.iter().map(|b| b.norm_sqr()).sum::<f64>()
    }

    /// Largest deviation of `phi - e_{-1}` from `span{e_k}` with the stored coefficients.
    pub fn normal_form_defect(&self) -> Result<f64> {
        let samples = (1..self.n())
            .map(|k| self.alpha_field(k))
            .collect::<Result<Vec<_>>>()?;
        let mut worst = 0.0f64;
        for (node, m) in self.phi.values.iter().enumerate() {
            let mut d = m - &self.basis.em1;
            for (k, f) in (1..self.n()).zip(&samples) {
                d -= self.basis.e(k).map(|x| x * f.values[node]);
            }
            worst = worst.max(crate::linalg::max_abs(&d));
        }
        Ok(worst)
    }
}

/// `tr(phi^2)` per node.
pub fn hopf_differential(phi: &HiggsField) -> ScalarField {
    phi.phi.map(|m| trace(&(m * m)))
}

/// `c_n = 2 tr(e_{-1} e_1)`, so that `tr(phi^2) = c_n alpha_1` on the Hitchin section.
pub fn hopf_constant(basis: &LieBasis) -> f64 {
    2.0 * trace(&(&basis.em1 * &basis.e1)).re
}

/// `H^{-1} m^dagger H` per node.
pub fn adjoint_star(m: &MatrixField, h: &HermitianMetricField) -> Result<MatrixField> {
    if m.domain != h.domain() {
        return Err(Error::DomainMismatch);
    }
    if m.dim() != h.dim() {
        return Err(Error::DimensionMismatch(format!(
            "field is {0}x{0}, metric is {1}x{1}",
            m.dim(),
            h.dim()
        )));
    }
    Ok(match h {
        HermitianMetricField::Diagonal(u) => MatrixField::from_fn(m.domain, |node| {
            let a = &m.values[node];
            let n = a.nrows();
            CMat::from_fn(n, n, |i, j| {
                a[(j, i)].conj() * (2.0 * (u[j].values[node] - u[i].values[node])).exp()
            })
        }),
        HermitianMetricField::Full(_) => MatrixField::from_fn(m.domain, |node| {
            h.power_at(node, -1.0) * m.values[node].adjoint() * h.power_at(node, 1.0)
        }),
    })
}

/// `e^{i theta} phi` as raw matrix data.
pub fn circle_action(phi: &HiggsField, theta: f64) -> HiggsField {
    let phase = Complex64::from_polar(1.0, theta);
    HiggsField {
        basis: phi.basis.clone(),
        alphas: Vec::new(),
        phi: phi.phi.map(|m| m.map(|z| z * phase)),
        origin: Origin::Raw,
    }
}

/// Normal-form representative of the rotated field: `alpha_k -> e^{i (k+1) theta} alpha_k`.
pub fn circle_action_normal_form(phi: &HiggsField, theta: f64) -> Result<HiggsField> {
    if phi.origin != Origin::HitchinSection {
        return Err(Error::Precondition(
            "normal-form circle action needs a Hitchin-section field".into(),
        ));
    }
    let alphas: Vec<_> = phi
        .alphas
        .iter()
        .map(|a| a.scaled(Complex64::from_polar(1.0, (a.k + 1) as f64 * theta)))
        .collect();
    build_hitchin_higgs(&phi.basis, &alphas, &phi.domain())
}

#[derive(Clone, Debug)]
pub struct FiducialMetric {
    pub metric: HermitianMetricField,
    /// Nodes where the pointwise equation has no solution and values were interpolated.
    pub flagged: Vec<usize>,
    /// False when no node admits a solution; the metric is then the identity.
    pub defined: bool,
}

/// Diagonal pointwise solution of `[phi, phi^{*H}] = 0` driven by the corner entry `phi_{1n}`.
///
/// Exact for cyclic fields; for other fields only the top differential is used.
pub fn fiducial_metric(phi: &HiggsField) -> FiducialMetric {
    let n = phi.n();
    let domain = phi.domain();
    const ZERO: f64 = 1e-12;
    let log_a: Vec<Option<f64>> = phi
        .phi
        .values
        .iter()
        .map(|m| {
            let a = m[(0, n - 1)].norm();
            (a > ZERO).then(|| a.ln())
        })
        .collect();
    let flagged: Vec<usize> = (0..log_a.len()).filter(|i| log_a[*i].is_none()).collect();
    if flagged.len() == log_a.len() {
        return FiducialMetric {
            metric: HermitianMetricField::identity_diagonal(domain, n),
            flagged,
            defined: false,
        };
    }
    let mut d: Vec<f64> = log_a.iter().map(|v| v.unwrap_or(0.0) / n as f64).collect();
    if !flagged.is_empty() {
        harmonic_fill(&domain, &mut d, &flagged);
    }
    let u = (0..n)
        .map(|j| {
            let offset = j as f64 - (n as f64 - 1.0) / 2.0;
            RealField::new(domain, d.iter().map(|x| offset * x).collect()).expect("grid size")
        })
        .collect();
    FiducialMetric {
        metric: HermitianMetricField::Diagonal(u),
        flagged,
        defined: true,
    }
}

/// Fills `holes` with the discrete harmonic extension of the surrounding values.
fn harmonic_fill(domain: &SurfaceDomain, v: &mut [f64], holes: &[usize]) {
    let side = domain.side();
    let periodic = domain.is_torus();
    let neighbours = |node: usize| -> Vec<usize> {
        let (r, c) = domain.row_col(node);
        let mut out = Vec::with_capacity(4);
        for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let (rr, cc) = (r as i64 + dr, c as i64 + dc);
            let s = side as i64;
            if periodic {
                out.push((rr.rem_euclid(s) * s + cc.rem_euclid(s)) as usize);
            } else if (0..s).contains(&rr) && (0..s).contains(&cc) {
                out.push((rr * s + cc) as usize);
            }
        }
        out
    };
    let adj: Vec<Vec<usize>> = holes.iter().map(|h| neighbours(*h)).collect();
    for _ in 0..20_000 {
        let mut change = 0.0f64;
        for (h, nb) in holes.iter().zip(&adj) {
            let avg = nb.iter().map(|j| v[*j]).sum::<f64>() / nb.len() as f64;
            change = change.max((avg - v[*h]).abs());
            v[*h] = avg;
        }
        if change < 1e-13 {
            break;
        }
    }
}

/// Sup-norm of `d/dzbar` over the differentials (or over the entries of raw data).
pub fn harmonicity_defect(phi: &HiggsField) -> Result<f64> {
    let ops = DiffOps::new(&phi.domain())?;
    let mut worst = 0.0f64;
    match phi.origin {
        Origin::HitchinSection => {
            for a in &phi.alphas {
                let f = a.evaluate(&phi.domain())?;
                worst = worst.max(ops.d_dzbar(&f)?.sup_norm());
            }
        }
        Origin::Raw => {
            let n = phi.n();
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max(ops.d_dzbar(&phi.phi.entry(i, j))?.sup_norm());
                }
            }
        }
    }
    Ok(worst)
}
