//! Manning-type volume-entropy lower bound `(1/Vol) int sqrt(-K) dV`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{integrate_over, snapshot, RealField, SurfaceDomain};
use crate::error::{Error, Result};
use crate::geometry::GeometryReport;
use crate::linalg::pairwise_sum;

/// Curvature above this at any node violates the non-positive curvature hypothesis.
pub const POSITIVE_K_LIMIT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    SolvedRun,
    SyntheticMetric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Compact data: a lower bound for the volume entropy.
    EntropyBound,
    /// Patch data: the same average, with no compact quotient behind it.
    LocalIntegrandStatistic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrandStats {
    pub min: f64,
    /// `dV`-weighted mean, equal to `bound`.
    pub mean: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub source: Source,
    pub kind: BoundKind,
    pub volume: f64,
    pub bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gauss_bonnet_defect: Option<f64>,
    pub integrand_stats: IntegrandStats,
    /// `|bound - (1/Vol) int sqrt(-Sec + |B|^2 / 2) dV|` when both forms exist.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gauss_form_difference: Option<f64>,
    pub nodes: usize,
}

fn all_nodes(d: &SurfaceDomain) -> Vec<usize> {
    (0..d.node_count()).collect()
}

fn average_sqrt(radicand: &RealField, dv: &RealField, nodes: &[usize]) -> Result<(f64, f64, IntegrandStats)> {
    let volume = integrate_over(&RealField::constant(dv.domain, 1.0), dv, nodes)?;
    if !(volume > 0.0) {
        return Err(Error::Precondition(format!(
            "volume {volume:.3e} is not positive; the metric is degenerate on the evaluation set"
        )));
    }
    let root = radicand.map(|r| r.max(0.0).sqrt());
    let bound = integrate_over(&root, dv, nodes)? / volume;
    let vals = nodes.iter().map(|i| root.values[*i]);
    let stats = IntegrandStats {
        min: vals.clone().fold(f64::INFINITY, f64::min),
        mean: bound,
        max: vals.fold(f64::NEG_INFINITY, f64::max),
    };
    Ok((volume, bound, stats))
}

/// Bound over `nodes`; rejects `K > POSITIVE_K_LIMIT`.
pub fn manning_bound_over(k: &RealField, dv: &RealField, nodes: &[usize]) -> Result<EntropyReport> {
    k.check_same_domain(dv)?;
    if let Some(&node) = nodes.iter().find(|i| k.values[**i] > POSITIVE_K_LIMIT) {
        return Err(Error::PositiveCurvature {
            node,
            value: k.values[node],
            limit: POSITIVE_K_LIMIT,
        });
    }
    let (volume, bound, integrand_stats) = average_sqrt(&k.map(|v| -v), dv, nodes)?;
    Ok(EntropyReport {
        source: Source::SyntheticMetric,
        kind: BoundKind::EntropyBound,
        volume,
        bound,
        chi: None,
        gauss_bonnet_defect: None,
        integrand_stats,
        gauss_form_difference: None,
        nodes: nodes.len(),
    })
}

pub fn manning_bound(k: &RealField, dv: &RealField) -> Result<EntropyReport> {
    manning_bound_over(k, dv, &all_nodes(&k.domain))
}

/// `(1/Vol) int sqrt(-Sec + |B|^2 / 2) dV`.
pub fn gauss_form_bound(sec: &RealField, b_norm_sq: &RealField, dv: &RealField, nodes: &[usize]) -> Result<f64> {
    sec.check_same_domain(b_norm_sq)?;
    let radicand = RealField {
        domain: sec.domain,
        values: sec.values.iter().zip(&b_norm_sq.values).map(|(s, b)| -s + 0.5 * b).collect(),
    };
    Ok(average_sqrt(&radicand, dv, nodes)?.1)
}

/// `|int K dV - 2 pi chi|`; compact data only.
pub fn gauss_bonnet_check_over(k: &RealField, dv: &RealField, chi: i64, nodes: &[usize]) -> Result<f64> {
    if !k.domain.is_torus() {
        return Err(Error::Precondition(
            "Gauss-Bonnet needs compact data; the patch has a boundary".into(),
        ));
    }
    let total = integrate_over(k, dv, nodes)?;
    Ok((total - 2.0 * PI * chi as f64).abs())
}

pub fn gauss_bonnet_check(k: &RealField, dv: &RealField, chi: i64) -> Result<f64> {
    gauss_bonnet_check_over(k, dv, chi, &all_nodes(&k.domain))
}

/// Entropy report of a solved run over the nodes where its geometry is evaluated.
pub fn entropy_for_run(geom: &GeometryReport) -> Result<EntropyReport> {
    let d = geom.domain();
    let nodes = &geom.evaluated;
    let dv = geom.area_density();
    let mut rep = manning_bound_over(&geom.k_induced, &dv, nodes)?;
    rep.source = Source::SolvedRun;
    if d.is_torus() {
        rep.chi = Some(0);
        rep.gauss_bonnet_defect = Some(gauss_bonnet_check_over(&geom.k_induced, &dv, 0, nodes)?);
    } else {
        rep.kind = BoundKind::LocalIntegrandStatistic;
    }
    if let Some(b) = &geom.b_norm_sq {
        let alt = gauss_form_bound(&geom.sec_ambient, b, &dv, nodes)?;
        rep.gauss_form_difference = Some((alt - rep.bound).abs());
    }
    Ok(rep)
}

/// Curvature and area density of a compact surface supplied as data.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticMetric {
    pub name: String,
    pub k: RealField,
    pub dv: RealField,
    pub chi: i64,
}

pub const MANIFEST_FORMAT: &str = "higgslab-synthetic-metric";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    version: u32,
    name: String,
    chi: i64,
    /// File name of the curvature snapshot, relative to the manifest.
    curvature: String,
    /// File name of the area-density snapshot, relative to the manifest.
    area_density: String,
}

impl SyntheticMetric {
    /// Entropy report with the Gauss-Bonnet defect for the declared `chi`.
    pub fn report(&self) -> Result<EntropyReport> {
        let mut rep = manning_bound(&self.k, &self.dv)?;
        rep.chi = Some(self.chi);
        rep.gauss_bonnet_defect = Some(gauss_bonnet_check(&self.k, &self.dv, self.chi)?);
        Ok(rep)
    }

    /// Same surface with the metric multiplied by `lambda^2`.
    pub fn rescaled(&self, lambda: f64) -> Self {
        Self {
            name: format!("{}_x{lambda}", self.name),
            k: self.k.map(|v| v / (lambda * lambda)),
            dv: self.dv.map(|v| v * lambda * lambda),
            chi: self.chi,
        }
    }
}

/// Reads a manifest and its two snapshots; checks finiteness, `dV > 0` and
/// that both fields share one grid.
pub fn load_synthetic_metric(manifest: &Path) -> Result<SyntheticMetric> {
    let text = std::fs::read_to_string(manifest)?;
    let m: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Snapshot(format!("{}: bad manifest: {e}", manifest.display())))?;
    if m.format != MANIFEST_FORMAT || m.version != MANIFEST_VERSION {
        return Err(Error::Snapshot(format!(
            "{}: expected {MANIFEST_FORMAT} v{MANIFEST_VERSION}, found {} v{}",
            manifest.display(),
            m.format,
            m.version
        )));
    }
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let k = snapshot::read(&dir.join(&m.curvature))?.into_real()?;
    let dv = snapshot::read(&dir.join(&m.area_density))?.into_real()?;
    if k.domain != dv.domain {
        return Err(Error::Snapshot(format!(
            "curvature grid {0}x{0} and area-density grid {1}x{1} differ",
            k.domain.side(),
            dv.domain.side()
        )));
    }
    if let Some(i) = dv.values.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Snapshot(format!(
            "area density {} at node {i} is not positive",
            dv.values[i]
        )));
    }
    Ok(SyntheticMetric {
        name: m.name,
        k,
        dv,
        chi: m.chi,
    })
}

/// Writes `<dir>/<name>.json` with `<name>.K.fld` and `<name>.dV.fld`.
pub fn write_synthetic_metric(dir: &Path, metric: &SyntheticMetric) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let kname = format!("{}.K.fld", metric.name);
    let vname = format!("{}.dV.fld", metric.name);
    snapshot::write_real(&dir.join(&kname), &metric.k, Some("K"))?;
    snapshot::write_real(&dir.join(&vname), &metric.dv, Some("dV"))?;
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        name: metric.name.clone(),
        chi: metric.chi,
        curvature: kname,
        area_density: vname,
    };
    let path = dir.join(format!("{}.json", metric.name));
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(path)
}

/// Built-in synthetic surfaces, carried by a unit-area square grid.
pub mod samples {
    use super::*;

    fn carrier() -> SurfaceDomain {
        SurfaceDomain::square_torus(16).expect("valid grid")
    }

    /// `K = -1`, area `4 pi`, `chi = -2`.
    pub fn hyperbolic_genus2() -> SyntheticMetric {
        let d = carrier();
        SyntheticMetric {
            name: "hyperbolic_genus2".into(),
            k: RealField::constant(d, -1.0),
            dv: RealField::constant(d, 4.0 * PI),
            chi: -2,
        }
    }

    /// `K` equal to `-1` on one half and `-4` on the other, areas chosen so
    /// that the total curvature is `-4 pi`.
    pub fn piecewise_genus2() -> SyntheticMetric {
        let d = carrier();
        let half = d.side() / 2;
        SyntheticMetric {
            name: "piecewise_genus2".into(),
            k: RealField::from_fn(d, move |i| if d.row_col(i).0 < half { -1.0 } else { -4.0 }),
            dv: RealField::constant(d, 8.0 * PI / 5.0),
            chi: -2,
        }
    }

    pub fn all() -> Vec<SyntheticMetric> {
        vec![hyperbolic_genus2(), piecewise_genus2()]
    }
}

/// Mean of `|f|` over `nodes` in a fixed summation order.
pub(crate) fn mean_abs(f: &RealField, nodes: &[usize]) -> f64 {
    let vals: Vec<f64> = nodes.iter().map(|i| f.values[*i].abs()).collect();
    pairwise_sum(&vals) / vals.len().max(1) as f64
}
