//! Geometry of the harmonic map determined by `(phi, H)`.
//!
//! In the unitary gauge `phi_hat = H^{1/2} phi H^{-1/2}` the differential of
//! the map sends `d/dx, d/dy` to the Hermitian matrices
//! `xi_1 = phi_hat + phi_hat^dagger`, `xi_2 = i (phi_hat - phi_hat^dagger)`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{integrate, DiffOps, MatrixField, RealField, ScalarField, SurfaceDomain};
use crate::error::{Error, Result};
use crate::higgs::{hopf_differential, HiggsField};
use crate::linalg::{c, commutator, CMat};
use crate::solver::HermitianMetricField;

/// Relative branch tolerance: `det g <= BRANCH_REL * max det g` is a branch node.
pub const BRANCH_REL: f64 = 1e-10;
/// `|B|^2` above `-BNORM_CLIP` is clipped to zero.
pub const BNORM_CLIP: f64 = 1e-8;
/// `|B|^2` below `-BNORM_FAIL` is a Gauss-equation inconsistency.
pub const BNORM_FAIL: f64 = 1e-6;

/// `H^{1/2} phi H^{-1/2}` per node.
pub fn gauge_normalize(phi: &MatrixField, h: &HermitianMetricField) -> Result<MatrixField> {
    if phi.domain != h.domain() {
        return Err(Error::DomainMismatch);
    }
    Ok(match h {
        HermitianMetricField::Diagonal(u) => MatrixField::from_fn(phi.domain, |node| {
            let p = &phi.values[node];
            CMat::from_fn(p.nrows(), p.ncols(), |i, j| {
                p[(i, j)] * (u[i].values[node] - u[j].values[node]).exp()
            })
        }),
        HermitianMetricField::Full(_) => MatrixField::from_fn(phi.domain, |node| {
            h.power_at(node, 0.5) * &phi.values[node] * h.power_at(node, -0.5)
        }),
    })
}

fn xi(p: &CMat) -> (CMat, CMat) {
    let pd = p.adjoint();
    (p + &pd, (p - &pd).map(|z| z * c(0.0, 1.0)))
}

fn re_pair(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x * y.conj()).re).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PullbackMetric {
    pub g11: RealField,
    pub g12: RealField,
    pub g22: RealField,
    pub detg: RealField,
}

/// `g_ab = kappa Re tr(xi_a xi_b^dagger)` in the `(x, y)` frame.
pub fn pullback_metric(phi_hat: &MatrixField, kappa: f64) -> PullbackMetric {
    let d = phi_hat.domain;
    let comps: Vec<[f64; 3]> = phi_hat
        .map(|p| {
            let (x1, x2) = xi(p);
            [kappa * re_pair(&x1, &x1), kappa * re_pair(&x1, &x2), kappa * re_pair(&x2, &x2)]
        })
        .values;
    let pick = |k: usize| RealField {
        domain: d,
        values: comps.iter().map(|v| v[k]).collect(),
    };
    let (g11, g12, g22) = (pick(0), pick(1), pick(2));
    let detg = RealField {
        domain: d,
        values: comps.iter().map(|v| v[0] * v[2] - v[1] * v[1]).collect(),
    };
    PullbackMetric { g11, g12, g22, detg }
}

/// Nodes of `candidates` where `det g` is not above the relative branch tolerance.
pub fn immersion_certificate(detg: &RealField, candidates: &[usize]) -> Vec<usize> {
    let max = candidates.iter().map(|i| detg.values[*i]).fold(0.0, f64::max);
    let eps = BRANCH_REL * max;
    candidates
        .iter()
        .copied()
        .filter(|i| !(detg.values[*i] > eps))
        .collect()
}

/// `(g11 + g22) / 2` and its integral.
pub fn energy_density(g: &PullbackMetric) -> Result<(RealField, f64)> {
    let density = RealField {
        domain: g.g11.domain,
        values: g.g11.values.iter().zip(&g.g22.values).map(|(a, b)| 0.5 * (a + b)).collect(),
    };
    let total = integrate(&density, &RealField::constant(density.domain, 1.0))?;
    Ok((density, total))
}

/// Gaussian curvature of `g` on `nodes`; zero elsewhere.
///
/// Conformal metrics use `-Lap(psi) / e^{2 psi}` with `e^{2 psi} = g11`,
/// others the Brioschi formula. Both are evaluated on `g / kappa` and then
/// divided by `kappa`, so the `kappa` scaling is exact.
pub fn induced_curvature(
    g: &PullbackMetric,
    kappa: f64,
    conformal: bool,
    nodes: &[usize],
    ops: &DiffOps,
) -> Result<RealField> {
    let d = g.g11.domain;
    let e = g.g11.map(|v| v / kappa);
    let mut k = vec![0.0; d.node_count()];
    if conformal {
        let psi = e.map(|v| if *v > 0.0 { 0.5 * v.ln() } else { 0.0 });
        let lap = ops.laplacian_real(&psi)?;
        for &i in nodes {
            k[i] = -lap.values[i] / e.values[i] / kappa;
        }
    } else {
        let f = g.g12.map(|v| v / kappa);
        let gg = g.g22.map(|v| v / kappa);
        let dx = |x: &RealField| ops.d_dx_real(x);
        let dy = |x: &RealField| ops.d_dy_real(x);
        let (ex, ey) = (dx(&e)?, dy(&e)?);
        let (fx, fy) = (dx(&f)?, dy(&f)?);
        let (gx, gy) = (dx(&gg)?, dy(&gg)?);
        let eyy = dy(&ey)?;
        let fxy = dy(&fx)?;
        let gxx = dx(&gx)?;
        for &i in nodes {
            let (ev, fv, gv) = (e.values[i], f.values[i], gg.values[i]);
            let a = nalgebra::Matrix3::new(
                -0.5 * eyy.values[i] + fxy.values[i] - 0.5 * gxx.values[i],
                0.5 * ex.values[i],
                fx.values[i] - 0.5 * ey.values[i],
                fy.values[i] - 0.5 * gx.values[i],
                ev,
                fv,
                0.5 * gy.values[i],
                fv,
                gv,
            );
            let b = nalgebra::Matrix3::new(
                0.0,
                0.5 * ey.values[i],
                0.5 * gx.values[i],
                0.5 * ey.values[i],
                ev,
                fv,
                0.5 * gx.values[i],
                fv,
                gv,
            );
            let det = ev * gv - fv * fv;
            k[i] = (a.determinant() - b.determinant()) / (det * det) / kappa;
        }
    }
    RealField::new(d, k)
}

/// `-kappa tr(C C^dagger) / det g` with `C = [xi_1, xi_2]` on `nodes`; zero elsewhere.
pub fn ambient_sectional(phi_hat: &MatrixField, detg: &RealField, kappa: f64, nodes: &[usize]) -> RealField {
    let d = phi_hat.domain;
    let mut sec = vec![0.0; d.node_count()];
    for &i in nodes {
        let (x1, x2) = xi(&phi_hat.values[i]);
        let cm = commutator(&x1, &x2);
        sec[i] = -kappa * re_pair(&cm, &cm) / detg.values[i];
    }
    RealField { domain: d, values: sec }
}

/// `2 (Sec - K)` on `nodes`, clipped to zero within the noise band.
///
/// Returns the field and the first node (if any) where the raw value is
/// below `-BNORM_FAIL`, which signals a Gauss-equation inconsistency.
pub fn second_fundamental_norm(
    k: &RealField,
    sec: &RealField,
    nodes: &[usize],
) -> Result<(RealField, Option<(usize, f64)>)> {
    k.check_same_domain(sec)?;
    let mut b = vec![0.0; k.values.len()];
    let mut bad: Option<(usize, f64)> = None;
    for &i in nodes {
        let raw = 2.0 * (sec.values[i] - k.values[i]);
        if raw < -BNORM_FAIL && bad.is_none_or(|(_, v)| raw < v) {
            bad = Some((i, raw));
        }
        b[i] = if (-BNORM_CLIP..0.0).contains(&raw) { 0.0 } else { raw };
    }
    Ok((RealField::new(k.domain, b)?, bad))
}

/// Strict variant: errors on inconsistency.
pub fn second_fundamental_norm_checked(k: &RealField, sec: &RealField, nodes: &[usize]) -> Result<RealField> {
    let (b, bad) = second_fundamental_norm(k, sec, nodes)?;
    match bad {
        Some((node, value)) => Err(Error::GaussInconsistency { node, value }),
        None => Ok(b),
    }
}

#[derive(Clone, Debug)]
pub struct GeometryReport {
    pub kappa: f64,
    pub g11: RealField,
    pub g12: RealField,
    pub g22: RealField,
    pub detg: RealField,
    /// `g11 = g22`, `g12 = 0` up to tolerance; only then are `B` and the
    /// conformal factor defined.
    pub conformal: bool,
    pub conformal_factor: Option<RealField>,
    pub k_induced: RealField,
    pub sec_ambient: RealField,
    pub b_norm_sq: Option<RealField>,
    pub energy_density: RealField,
    pub total_energy: f64,
    pub hopf: ScalarField,
    pub branch_points: Vec<usize>,
    /// Nodes where curvatures are evaluated (interior and non-degenerate).
    pub evaluated: Vec<usize>,
    pub gauss_inconsistency: Option<(usize, f64)>,
}

/// Relative Hopf tolerance for treating a run as conformal.
pub const CONFORMAL_REL: f64 = 1e-12;

pub fn build_geometry(
    phi: &HiggsField,
    h: &HermitianMetricField,
    kappa: f64,
    ops: &DiffOps,
) -> Result<GeometryReport> {
    let d = phi.domain();
    let phi_hat = gauge_normalize(&phi.phi, h)?;
    let g = pullback_metric(&phi_hat, kappa);
    let hopf = hopf_differential(phi);
    let scale = phi_hat
        .values
        .iter()
        .map(|m| m.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .fold(1.0, f64::max);
    let conformal = hopf.sup_norm() <= CONFORMAL_REL * scale;
    let interior = d.interior_nodes();
    let branch_points = immersion_certificate(&g.detg, &interior);
    let evaluated: Vec<usize> = interior
        .iter()
        .copied()
        .filter(|i| branch_points.binary_search(i).is_err())
        .collect();
    let k = induced_curvature(&g, kappa, conformal, &evaluated, ops)?;
    let sec = ambient_sectional(&phi_hat, &g.detg, kappa, &evaluated);
    let (b, bad) = if conformal {
        let (b, bad) = second_fundamental_norm(&k, &sec, &evaluated)?;
        (Some(b), bad)
    } else {
        (None, None)
    };
    let (density, total) = energy_density(&g)?;
    Ok(GeometryReport {
        kappa,
        conformal_factor: conformal.then(|| g.g11.map(|v| v / kappa)),
        g11: g.g11,
        g12: g.g12,
        g22: g.g22,
        detg: g.detg,
        conformal,
        k_induced: k,
        sec_ambient: sec,
        b_norm_sq: b,
        energy_density: density,
        total_energy: total,
        hopf,
        branch_points,
        evaluated,
        gauss_inconsistency: bad,
    })
}

fn extrema(f: &RealField, nodes: &[usize]) -> Option<(f64, f64)> {
    if nodes.is_empty() {
        return None;
    }
    let vals = nodes.iter().map(|i| f.values[*i]);
    Some((vals.clone().fold(f64::INFINITY, f64::min), vals.fold(f64::NEG_INFINITY, f64::max)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometrySummary {
    pub kappa: f64,
    pub conformal: bool,
    pub evaluated_nodes: usize,
    pub detg: Range,
    pub branch_points: Vec<usize>,
    pub conformality_defect: f64,
    pub hopf_sup: f64,
    pub total_energy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_induced: Option<Range>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sec_ambient: Option<Range>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_norm_sq: Option<Range>,
    /// Coordinates `(x, y)` of the largest `|B|^2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_norm_sq_argmax: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gauss_inconsistency: Option<(usize, f64)>,
}

impl GeometryReport {
    pub fn domain(&self) -> SurfaceDomain {
        self.g11.domain
    }

    pub fn min_detg(&self) -> f64 {
        let nodes = self.domain().interior_nodes();
        nodes.iter().map(|i| self.detg.values[*i]).fold(f64::INFINITY, f64::min)
    }

    /// `max (|g11 - g22| + |g12|) / max g11` over the interior.
    pub fn conformality_defect(&self) -> f64 {
        let nodes = self.domain().interior_nodes();
        let max_g11 = nodes.iter().map(|i| self.g11.values[*i]).fold(0.0, f64::max);
        let worst = nodes
            .iter()
            .map(|&i| (self.g11.values[i] - self.g22.values[i]).abs() + self.g12.values[i].abs())
            .fold(0.0, f64::max);
        if max_g11 == 0.0 {
            worst
        } else {
            worst / max_g11
        }
    }

    /// `sqrt(det g)`, the area density.
    pub fn area_density(&self) -> RealField {
        self.detg.map(|v| v.max(0.0).sqrt())
    }

    pub fn summary(&self) -> GeometrySummary {
        let d = self.domain();
        let interior = d.interior_nodes();
        let (dmin, dmax) = extrema(&self.detg, &interior).unwrap_or((0.0, 0.0));
        let ev = &self.evaluated;
        let range = |f: &RealField| extrema(f, ev).map(|(min, max)| Range { min, max });
        let argmax = self.b_norm_sq.as_ref().and_then(|b| {
            ev.iter()
                .copied()
                .reduce(|a, i| if b.values[i] > b.values[a] { i } else { a })
                .map(|i| {
                    let z = d.coord(i);
                    (z.re, z.im)
                })
        });
        GeometrySummary {
            kappa: self.kappa,
            conformal: self.conformal,
            evaluated_nodes: ev.len(),
            detg: Range { min: dmin, max: dmax },
            branch_points: self.branch_points.clone(),
            conformality_defect: self.conformality_defect(),
            hopf_sup: self.hopf.sup_norm(),
            total_energy: self.total_energy,
            k_induced: range(&self.k_induced),
            sec_ambient: range(&self.sec_ambient),
            b_norm_sq: self.b_norm_sq.as_ref().and_then(range),
            b_norm_sq_argmax: argmax,
            gauss_inconsistency: self.gauss_inconsistency,
        }
    }

    /// CSV with columns `x,y,K,Sec,Bnormsq,detg` over the evaluated nodes,
    /// after one `#` format line.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "# format = higgslab-geometry v1")?;
        writeln!(out, "x,y,K,Sec,Bnormsq,detg")?;
        let d = self.domain();
        for &i in &self.evaluated {
            let z = d.coord(i);
            let b = self.b_norm_sq.as_ref().map_or(f64::NAN, |b| b.values[i]);
            writeln!(
                out,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                z.re, z.im, self.k_induced.values[i], self.sec_ambient.values[i], b, self.detg.values[i]
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::higgs::{build_hitchin_higgs, circle_action, Differential};
    use crate::lie::construct_principal_sl2;
    use crate::linalg::{elementary, max_abs};
    use std::f64::consts::PI;

    fn torus() -> SurfaceDomain {
        SurfaceDomain::square_torus(16).unwrap()
    }

    #[test]
    fn gauge_normalize_conjugates() {
        let d = torus();
        let phi = MatrixField::constant(d, elementary(2, 1, 0));
        let id = HermitianMetricField::identity_diagonal(d, 2);
        assert_eq!(gauge_normalize(&phi, &id).unwrap(), phi);
        let h = HermitianMetricField::Diagonal(vec![
            RealField::constant(d, 4f64.ln() / 2.0),
            RealField::constant(d, -(4f64.ln()) / 2.0),
        ]);
        let hat = gauge_normalize(&phi, &h).unwrap();
        let m = h.power_at(0, 1.0);
        let root = CMat::from_fn(2, 2, |i, j| if i == j { c(m[(i, i)].re.sqrt(), 0.0) } else { c(0.0, 0.0) });
        let inv = root.clone().try_inverse().unwrap();
        assert!(max_abs(&(&hat.values[0] - &root * &phi.values[0] * inv)) < 1e-15);
        let full = gauge_normalize(&phi, &h.to_full()).unwrap();
        assert!(max_abs(&(&full.values[0] - &hat.values[0])) < 1e-14);
        let star_hat = hat.values[0].adjoint();
        let star = crate::higgs::adjoint_star(&phi, &h).unwrap();
        let conj = &root * &star.values[0] * root.clone().try_inverse().unwrap();
        assert!(max_abs(&(star_hat - conj)) < 1e-14);
    }

    #[test]
    fn fuchsian_point_metric_and_curvature() {
        let d = torus();
        for kappa in [1.0, 2.0] {
            let hat = MatrixField::constant(d, elementary(2, 1, 0));
            let g = pullback_metric(&hat, kappa);
            assert_eq!(g.g11.values[0], 2.0 * kappa);
            assert_eq!(g.g22.values[0], 2.0 * kappa);
            assert_eq!(g.g12.values[0], 0.0);
            assert_eq!(g.detg.values[0], 4.0 * kappa * kappa);
            let nodes: Vec<usize> = (0..d.node_count()).collect();
            let sec = ambient_sectional(&hat, &g.detg, kappa, &nodes);
            assert!((sec.values[3] + 2.0 / kappa).abs() < 1e-15);
            let (e, _) = energy_density(&g).unwrap();
            assert_eq!(e.values[0], 2.0 * kappa);
        }
        let zero = MatrixField::constant(d, CMat::zeros(2, 2));
        let g = pullback_metric(&zero, 1.0);
        let nodes: Vec<usize> = (0..d.node_count()).collect();
        assert_eq!(immersion_certificate(&g.detg, &nodes).len(), d.node_count());
    }

    #[test]
    fn branch_node_detected() {
        let d = SurfaceDomain::patch(16, 1.0).unwrap();
        let hat = MatrixField::from_fn(d, |i| elementary(2, 0, 1).map(|x| x * d.coord(i)));
        let g = pullback_metric(&hat, 1.0);
        let flagged = immersion_certificate(&g.detg, &d.interior_nodes());
        assert_eq!(flagged, vec![8 * 17 + 8]);
    }

    #[test]
    fn circle_action_preserves_metric_invariants() {
        let b = construct_principal_sl2(3).unwrap();
        let d = torus();
        let phi = build_hitchin_higgs(
            &b,
            &[Differential::constant(1, c(0.4, 0.1)), Differential::constant(2, c(1.0, -0.3))],
            &d,
        )
        .unwrap();
        let g0 = pullback_metric(&phi.phi, 1.0);
        let g1 = pullback_metric(&circle_action(&phi, PI / 3.0).phi, 1.0);
        for i in 0..d.node_count() {
            assert!((g0.detg.values[i] - g1.detg.values[i]).abs() < 1e-12);
            let t0 = g0.g11.values[i] + g0.g22.values[i];
            let t1 = g1.g11.values[i] + g1.g22.values[i];
            assert!((t0 - t1).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_metric_has_zero_curvature() {
        let d = SurfaceDomain::patch(32, 1.0).unwrap();
        let ops = DiffOps::new(&d).unwrap();
        let one = RealField::constant(d, 1.0);
        let g = PullbackMetric {
            g11: one.clone(),
            g12: RealField::constant(d, 0.0),
            g22: one.clone(),
            detg: one,
        };
        let nodes = d.interior_nodes();
        for conformal in [true, false] {
            let k = induced_curvature(&g, 1.0, conformal, &nodes, &ops).unwrap();
            assert!(k.sup_norm() < 1e-12);
        }
    }

    /// Round metric `e^{2 psi}` with `psi = log(2 / (1 + r^2))` has `K = 1`;
    /// a rescaled `psi = -log(1 + r^2)` has `K = 4 e^{-2 psi} / (1 + r^2)^2 = 4`.
    #[test]
    fn conformal_factor_oracle() {
        let d = SurfaceDomain::patch(128, 1.0).unwrap();
        let ops = DiffOps::new(&d).unwrap();
        let psi = RealField::from_fn(d, |i| -(1.0 + d.coord(i).norm_sqr()).ln());
        let e = psi.map(|p| (2.0 * p).exp());
        let g = PullbackMetric {
            g11: e.clone(),
            g12: RealField::constant(d, 0.0),
            g22: e.clone(),
            detg: e.map(|v| v * v),
        };
        let nodes = d.interior_nodes();
        let kc = induced_curvature(&g, 1.0, true, &nodes, &ops).unwrap();
        let kb = induced_curvature(&g, 1.0, false, &nodes, &ops).unwrap();
        for &i in &nodes {
            assert!((kc.values[i] - 4.0).abs() < 1e-6, "{}", kc.values[i]);
            assert!((kb.values[i] - 4.0).abs() < 1e-4, "{}", kb.values[i]);
        }
    }

    /// Non-conformal oracle: `g = diag(1, e^{2 f(x)})` has `K = -(f'' + f'^2)`.
    #[test]
    fn brioschi_oracle() {
        let d = SurfaceDomain::square_torus(64).unwrap();
        let ops = DiffOps::new(&d).unwrap();
        let f = |x: f64| 0.3 * (2.0 * PI * x).sin();
        let g22 = RealField::from_fn(d, |i| (2.0 * f(d.coord(i).re)).exp());
        let g = PullbackMetric {
            g11: RealField::constant(d, 1.0),
            g12: RealField::constant(d, 0.0),
            detg: g22.clone(),
            g22,
        };
        let nodes: Vec<usize> = (0..d.node_count()).collect();
        let k = induced_curvature(&g, 1.0, false, &nodes, &ops).unwrap();
        for &i in &nodes {
            let x = d.coord(i).re;
            let fp = 0.3 * 2.0 * PI * (2.0 * PI * x).cos();
            let fpp = -0.3 * 4.0 * PI * PI * (2.0 * PI * x).sin();
            assert!((k.values[i] + fpp + fp * fp).abs() < 1e-9);
        }
    }

    #[test]
    fn bnorm_clipping_and_errors() {
        let d = torus();
        let nodes = vec![0, 1, 2];
        let sec = RealField::constant(d, -1.0);
        let mut k = RealField::constant(d, -1.0);
        k.values[1] = -1.0 + 2e-9;
        k.values[2] = -2.0;
        let (b, bad) = second_fundamental_norm(&k, &sec, &nodes).unwrap();
        assert_eq!(b.values[1], 0.0);
        assert_eq!(b.values[2], 2.0);
        assert!(bad.is_none());
        k.values[0] = 0.0;
        assert!(matches!(
            second_fundamental_norm_checked(&k, &sec, &nodes),
            Err(Error::GaussInconsistency { node: 0, .. })
        ));
    }
}
