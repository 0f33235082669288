//! TOML run configuration.
//!
//! ```toml
//! [group]
//! n = 3
//!
//! [surface]
//! kind = "patch"      # or "torus"
//! N = 64
//! L = 1.0             # patch half-width; the torus takes tau = [re, im]
//!
//! [[differentials]]
//! k = 2
//! polynomial = [[0.0, 0.0], [1.0, 0.0]]   # or constant = [re, im], or fourier = [...]
//!
//! [solver]
//! tol = 1e-10
//! method = "auto"
//!
//! [metric]
//! kappa = 1.0
//!
//! [output]
//! dir = "out/patch_n3_linear"
//! ```
//!
//! Unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{RealField, SurfaceDomain};
use crate::error::{Error, Result};
use crate::higgs::{build_hitchin_higgs, Differential, FourierMode, HiggsField};
use crate::lie::construct_principal_sl2;
use crate::solver::{default_init, HermitianMetricField, Method, PathChoice, SolverParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub group: GroupSection,
    pub surface: SurfaceSection,
    #[serde(default)]
    pub differentials: Vec<DifferentialSpec>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub metric: MetricSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSection {
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceKind {
    Torus,
    Patch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSection {
    pub kind: SurfaceKind,
    #[serde(rename = "N")]
    pub resolution: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<Complex64>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
}

/// One differential; exactly one of the profile keys must be present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DifferentialSpec {
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<Complex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polynomial: Option<Vec<Complex64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fourier: Option<Vec<FourierMode>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    /// Pointwise algebraic solution, harmonically filled where undefined.
    #[default]
    Fiducial,
    Identity,
}

/// Adds `amplitude * cos(2 pi (ms s + mt t)) * x / max|x|` to `log H / 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub amplitude: f64,
    #[serde(default)]
    pub ms: i32,
    #[serde(default)]
    pub mt: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol: f64,
    pub max_iter: usize,
    pub dt: f64,
    pub method: Method,
    pub path: PathChoice,
    pub divergence_bound: f64,
    pub init: InitKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let p = SolverParams::default();
        Self {
            tol: p.tol,
            max_iter: p.max_iter,
            dt: p.dt,
            method: p.method,
            path: p.path,
            divergence_bound: p.divergence_bound,
            init: InitKind::Fiducial,
            perturbation: None,
        }
    }
}

impl SolverSection {
    pub fn params(&self) -> SolverParams {
        SolverParams {
            tol: self.tol,
            max_iter: self.max_iter,
            dt: self.dt,
            method: self.method,
            path: self.path,
            divergence_bound: self.divergence_bound,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricSection {
    /// Scale of the invariant form `kappa tr(XY)`.
    pub kappa: f64,
}

impl Default for MetricSection {
    fn default() -> Self {
        Self { kappa: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub t_values: Vec<f64>,
    /// Window half-width as a fraction of the patch half-width.
    #[serde(default = "default_window")]
    pub window: f64,
}

fn default_window() -> f64 {
    0.5
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Resolved configuration with every default filled in.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    fn validate(&self) -> Result<()> {
        self.domain()?;
        for d in &self.differentials {
            let count = [d.constant.is_some(), d.polynomial.is_some(), d.fourier.is_some()]
                .iter()
                .filter(|b| **b)
                .count();
            if count != 1 {
                return Err(Error::Config(format!(
                    "differential k = {} needs exactly one of constant, polynomial, fourier",
                    d.k
                )));
            }
        }
        if !(self.metric.kappa > 0.0) {
            return Err(Error::Config(format!("metric.kappa must be positive, got {}", self.metric.kappa)));
        }
        if !(self.solver.tol > 0.0) || !(self.solver.dt > 0.0) {
            return Err(Error::Config("solver.tol and solver.dt must be positive".into()));
        }
        if let Some(s) = &self.sweep {
            if s.t_values.is_empty() || !(s.window > 0.0 && s.window <= 1.0) {
                return Err(Error::Config(
                    "sweep needs at least one t value and a window in (0, 1]".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<SurfaceDomain> {
        let s = &self.surface;
        match s.kind {
            SurfaceKind::Torus => {
                if s.half_width.is_some() {
                    return Err(Error::Config("surface.L applies to patches only".into()));
                }
                SurfaceDomain::torus(s.resolution, s.tau.unwrap_or(Complex64::new(0.0, 1.0)))
            }
            SurfaceKind::Patch => {
                if s.tau.is_some() {
                    return Err(Error::Config("surface.tau applies to tori only".into()));
                }
                SurfaceDomain::patch(s.resolution, s.half_width.unwrap_or(1.0))
            }
        }
    }

    pub fn differentials(&self) -> Result<Vec<Differential>> {
        self.differentials
            .iter()
            .map(|d| {
                if let Some(c) = d.constant {
                    Ok(Differential::constant(d.k, c))
                } else if let Some(p) = &d.polynomial {
                    Differential::polynomial(d.k, p.clone())
                } else {
                    Ok(Differential::fourier(d.k, d.fourier.clone().unwrap_or_default()))
                }
            })
            .collect()
    }

    pub fn higgs(&self) -> Result<HiggsField> {
        let basis = construct_principal_sl2(self.group.n)?;
        build_hitchin_higgs(&basis, &self.differentials()?, &self.domain()?)
    }

    /// Initial metric from `solver.init` and `solver.perturbation`.
    pub fn initial_metric(&self, phi: &HiggsField) -> Result<HermitianMetricField> {
        let d = phi.domain();
        let base = match self.solver.init {
            InitKind::Fiducial => default_init(phi),
            InitKind::Identity if crate::solver::diagonal_path_applies(phi) => {
                HermitianMetricField::identity_diagonal(d, phi.n())
            }
            InitKind::Identity => HermitianMetricField::identity_full(d, phi.n()),
        };
        let Some(p) = &self.solver.perturbation else {
            return Ok(base);
        };
        let n = phi.n();
        let top = (n - 1) as f64 / 2.0;
        let mode = RealField::from_fn(d, |i| {
            let (s, t) = d.grid_coords(i);
            let arg = 2.0 * std::f64::consts::PI * (p.ms as f64 * s + p.mt as f64 * t);
            p.amplitude * arg.cos()
        });
        match base {
            HermitianMetricField::Diagonal(u) => {
                let comps = u
                    .iter()
                    .enumerate()
                    .map(|(j, f)| {
                        let w = (top - j as f64) / top;
                        RealField {
                            domain: d,
                            values: f.values.iter().zip(&mode.values).map(|(a, m)| a + w * m).collect(),
                        }
                    })
                    .collect();
                HermitianMetricField::diagonal(comps)
            }
            HermitianMetricField::Full(mut s) => {
                for (m, a) in s.values.iter_mut().zip(&mode.values) {
                    for j in 0..n {
                        m[(j, j)] += Complex64::new(2.0 * a * (top - j as f64) / top, 0.0);
                    }
                }
                Ok(HermitianMetricField::full(s))
            }
        }
    }
}
