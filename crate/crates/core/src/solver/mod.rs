//! Harmonic metrics: residual of the self-duality equations, the solver, and
//! the associated flat connection.
//!
//! All curvature-type matrices are stored as the coefficient of `dz ^ dzbar`.
//! With `phi^* = H^{-1} phi^dagger H` the residual is
//! `R = -d/dzbar (H^{-1} dH/dz) + [phi, phi^*]`; for `H = diag(e^{2u_j})` the
//! curvature term is `-Lap(u_j) / 2` on the diagonal. On the patch every
//! residual-type field is set to zero on the boundary ring, where the metric
//! is Dirichlet data.

mod krylov;
pub mod metric;

use std::sync::OnceLock;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::domain::{integrate, DiffOps, MatrixField, RealField, ShiftedPoisson, SurfaceDomain};
use crate::error::{Error, Result};
use crate::higgs::{adjoint_star, build_hitchin_higgs, fiducial_metric, Differential, HiggsField, Origin};
use crate::linalg::{c, commutator, max_abs, pairwise_sum, CMat};

pub use metric::{project_hermitian_traceless, HermitianMetricField};

use krylov::{gmres, norm};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Relax,
    Newton,
    /// Relaxation while far from the solution, Newton-Krylov once it stalls.
    #[default]
    Auto,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathChoice {
    /// Diagonal unknowns for cyclic fields and `n = 2`, full Hermitian otherwise.
    #[default]
    Auto,
    Diagonal,
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    pub tol: f64,
    pub max_iter: usize,
    /// Initial relaxation step length.
    pub dt: f64,
    pub method: Method,
    pub path: PathChoice,
    /// `Diverged` once `max |u|` (or `max |S| / 2`) exceeds this.
    pub divergence_bound: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 400,
            dt: 1.0,
            method: Method::Auto,
            path: PathChoice::Auto,
            divergence_bound: 50.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    Diverged,
    Obstructed,
    MaxIter,
}

/// Invariant-subbundle obstruction on a compact domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstruction {
    /// `phi` preserves `span(e_{m+1}, ..., e_n)`; this is `m`.
    pub block: usize,
    /// `int sum_{j <= m} R_jj` at the initial metric; zero for any solution.
    pub integral: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub iterations: usize,
    pub newton_steps: usize,
    pub residual_sup: f64,
    pub residual_l2: f64,
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub obstruction: Option<Obstruction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    /// `L^2` residual after every accepted step, starting with the initial value.
    pub l2_history: Vec<f64>,
    /// Excluded from serialization so reports stay reproducible.
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// Residual matrix field with summary norms over the active nodes.
#[derive(Clone, Debug)]
pub struct ResidualField {
    pub field: MatrixField,
    /// Largest entry modulus.
    pub sup: f64,
    /// Root mean square of the Frobenius norm.
    pub l2: f64,
}

impl ResidualField {
    fn from_field(field: MatrixField) -> Self {
        let (sup, l2) = matrix_norms(&field);
        Self { field, sup, l2 }
    }

    /// `max |tr R|`.
    pub fn trace_defect(&self) -> f64 {
        self.field
            .values
            .iter()
            .map(|m| crate::linalg::trace(m).norm())
            .fold(0.0, f64::max)
    }

    /// `max |H^{-1} R^dagger H - R|`; the residual is self-adjoint for `H`.
    pub fn self_adjointness_defect(&self, h: &HermitianMetricField) -> Result<f64> {
        let star = adjoint_star(&self.field, h)?;
        Ok(star
            .values
            .iter()
            .zip(&self.field.values)
            .map(|(a, b)| max_abs(&(a - b)))
            .fold(0.0, f64::max))
    }
}

fn matrix_norms(field: &MatrixField) -> (f64, f64) {
    let d = field.domain;
    let q = d.quadrature_weights();
    let sup = field.values.iter().map(max_abs).fold(0.0, f64::max);
    let terms: Vec<f64> = field
        .values
        .iter()
        .zip(&q)
        .map(|(m, w)| w * m.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .collect();
    (sup, (pairwise_sum(&terms) / d.area()).sqrt())
}

fn zero_boundary(field: &mut MatrixField) {
    let d = field.domain;
    if d.is_torus() {
        return;
    }
    let n = field.dim();
    for (i, m) in field.values.iter_mut().enumerate() {
        if d.is_boundary(i) {
            *m = CMat::zeros(n, n);
        }
    }
}

/// Chern curvature `-d/dzbar (H^{-1} dH/dz)` of the trivialized bundle.
///
/// For a full metric the discrete value is projected onto `H`-self-adjoint
/// traceless matrices, where the exact curvature lies; without this the
/// product-rule truncation error leaves a part no metric can cancel.
pub fn chern_curvature(h: &HermitianMetricField, ops: &DiffOps) -> Result<MatrixField> {
    if *ops.domain() != h.domain() {
        return Err(Error::DomainMismatch);
    }
    let mut out = match h {
        HermitianMetricField::Diagonal(u) => {
            let n = u.len();
            let laps = u
                .iter()
                .map(|f| ops.laplacian_real(f))
                .collect::<Result<Vec<_>>>()?;
            MatrixField::from_fn(h.domain(), |node| {
                let mut m = CMat::zeros(n, n);
                for (j, l) in laps.iter().enumerate() {
                    m[(j, j)] = c(-0.5 * l.values[node], 0.0);
                }
                m
            })
        }
        HermitianMetricField::Full(_) => {
            let hm = h.matrices();
            let hinv = h.power(-1.0);
            let dh = hm.map_entries(|f| ops.d_dz(f))?;
            let a = hinv.zip_with(&dh, |x, y| x * y)?;
            let f = a.map_entries(|f| ops.d_dzbar(f))?;
            MatrixField::from_fn(h.domain(), |i| {
                let x = -&f.values[i];
                let sym = (&x + &hinv.values[i] * x.adjoint() * &hm.values[i]).scale(0.5);
                let n = sym.nrows();
                let tr = crate::linalg::trace(&sym) / n as f64;
                sym - CMat::identity(n, n).map(|z| z * tr)
            })
        }
    };
    zero_boundary(&mut out);
    Ok(out)
}

fn curvature_plus_commutator(
    h: &HermitianMetricField,
    phi: &MatrixField,
    ops: &DiffOps,
) -> Result<MatrixField> {
    let chern = chern_curvature(h, ops)?;
    let star = adjoint_star(phi, h)?;
    let mut r = MatrixField::from_fn(h.domain(), |i| {
        &chern.values[i] + commutator(&phi.values[i], &star.values[i])
    });
    zero_boundary(&mut r);
    Ok(r)
}

/// Self-duality residual `F(H) + [phi, phi^{*H}]`.
pub fn residual(h: &HermitianMetricField, phi: &HiggsField, ops: &DiffOps) -> Result<ResidualField> {
    if phi.domain() != h.domain() {
        return Err(Error::DomainMismatch);
    }
    Ok(ResidualField::from_field(curvature_plus_commutator(h, &phi.phi, ops)?))
}

/// `A_z = H^{-1} dH/dz + phi`, `A_zbar = phi^{*H}` and the curvature
/// `d/dz A_zbar - d/dzbar A_z + [A_z, A_zbar]` of `d + A`.
#[derive(Clone, Debug)]
pub struct FlatConnection {
    pub a_z: MatrixField,
    pub a_zbar: MatrixField,
    pub curvature: MatrixField,
    pub curvature_sup: f64,
    pub residual_sup: f64,
}

pub const FLAT_PRECONDITION: f64 = 1e-6;

pub fn assemble_flat_connection(
    h: &HermitianMetricField,
    phi: &HiggsField,
    ops: &DiffOps,
) -> Result<FlatConnection> {
    let res = residual(h, phi, ops)?;
    if res.sup >= FLAT_PRECONDITION {
        return Err(Error::Precondition(format!(
            "flat connection needs a solved metric; residual sup-norm is {:.3e}",
            res.sup
        )));
    }
    let hm = h.matrices();
    let hinv = h.power(-1.0);
    let dh = hm.map_entries(|f| ops.d_dz(f))?;
    let a_z = MatrixField::from_fn(h.domain(), |i| &hinv.values[i] * &dh.values[i] + &phi.phi.values[i]);
    let a_zbar = adjoint_star(&phi.phi, h)?;
    let d_azbar = a_zbar.map_entries(|f| ops.d_dz(f))?;
    let dbar_az = a_z.map_entries(|f| ops.d_dzbar(f))?;
    let mut curvature = MatrixField::from_fn(h.domain(), |i| {
        &d_azbar.values[i] - &dbar_az.values[i] + commutator(&a_z.values[i], &a_zbar.values[i])
    });
    zero_boundary(&mut curvature);
    let curvature_sup = curvature.values.iter().map(max_abs).fold(0.0, f64::max);
    Ok(FlatConnection {
        a_z,
        a_zbar,
        curvature,
        curvature_sup,
        residual_sup: res.sup,
    })
}

/// Checks the sign convention on the `n = 2`, `alpha_1 = 2` torus oracle:
/// the identity metric is an exact zero and the linearization there is
/// `-Lap/2 + 8` on the `u_1 = -u_2` mode, so `u <- u - P(R)` is a contraction.
pub fn sign_self_test() -> std::result::Result<(), String> {
    static CELL: OnceLock<std::result::Result<(), String>> = OnceLock::new();
    CELL.get_or_init(run_sign_self_test).clone()
}

fn run_sign_self_test() -> std::result::Result<(), String> {
    use std::f64::consts::PI;
    let inner = || -> Result<std::result::Result<(), String>> {
        let d = SurfaceDomain::square_torus(16)?;
        let ops = DiffOps::new(&d)?;
        let basis = crate::lie::construct_principal_sl2(2)?;
        let phi = build_hitchin_higgs(&basis, &[Differential::constant(1, c(2.0, 0.0))], &d)?;
        let id = HermitianMetricField::identity_diagonal(d, 2);
        let r0 = residual(&id, &phi, &ops)?;
        if r0.sup > 1e-14 {
            return Ok(Err(format!("oracle residual {:.3e} is not zero", r0.sup)));
        }
        let eps = 1e-6;
        let mode = RealField::from_fn(d, |i| (2.0 * PI * d.grid_coords(i).0).cos());
        let u1 = mode.map(|x| eps * x);
        let u2 = mode.map(|x| -eps * x);
        let r = residual(&HermitianMetricField::Diagonal(vec![u1, u2]), &phi, &ops)?;
        let want = 2.0 * PI * PI + 8.0;
        let got = r.field.values[1][(0, 0)].re / (eps * mode.values[1]);
        if (got - want).abs() > 1e-4 * want {
            return Ok(Err(format!("linearization {got:.6} differs from {want:.6}")));
        }
        Ok(Ok(()))
    };
    inner().unwrap_or_else(|e| Err(e.to_string()))
}

/// Obstruction test on the torus, evaluated at `h`.
pub fn detect_obstruction(
    phi: &HiggsField,
    h: &HermitianMetricField,
    ops: &DiffOps,
) -> Result<Option<Obstruction>> {
    let d = phi.domain();
    if !d.is_torus() {
        return Ok(None);
    }
    let n = phi.n();
    let scale = phi.phi.values.iter().map(max_abs).fold(1.0, f64::max);
    let tiny = 1e-14 * scale;
    let mut res = None;
    for m in 1..n {
        let upper_zero = phi
            .phi
            .values
            .iter()
            .all(|p| (0..m).all(|j| (m..n).all(|k| p[(j, k)].norm() <= tiny)));
        let lower_nonzero = phi
            .phi
            .values
            .iter()
            .any(|p| (m..n).any(|j| (0..m).any(|k| p[(j, k)].norm() > tiny)));
        if !(upper_zero && lower_nonzero) {
            continue;
        }
        let r = match &res {
            Some(r) => r,
            None => res.insert(residual(h, phi, ops)?),
        };
        let partial = RealField::from_fn(d, |i| (0..m).map(|j| r.field.values[i][(j, j)].re).sum());
        let integral = integrate(&partial, &RealField::constant(d, 1.0))?;
        if integral.abs() > 1e-10 * d.area() {
            return Ok(Some(Obstruction { block: m, integral }));
        }
    }
    Ok(None)
}

struct Eval {
    vec: Vec<f64>,
    sup: f64,
    l2: f64,
}

/// One discretization of the unknowns: `x` is the state, increments live in
/// the frame of the current state.
trait System {
    type State: Clone;
    fn eval(&self, x: &Self::State) -> Result<Eval>;
    fn retract(&self, x: &Self::State, delta: &[f64]) -> Self::State;
    /// Residual of `retract(x, delta)` expressed in the frame of `x`.
    fn eval_in_frame(&self, x: &Self::State, delta: &[f64]) -> Result<Vec<f64>>;
    fn update_shift(&mut self, x: &Self::State);
    fn precondition(&self, v: &[f64]) -> Vec<f64>;
    fn size(&self, x: &Self::State) -> f64;
}

/// Pointwise shift for the preconditioner: twice the largest diagonal of the
/// pointwise commutator Jacobian, a bound on its spectrum.
fn commutator_shift(phi_hat: impl Iterator<Item = CMat>) -> f64 {
    phi_hat
        .map(|p| {
            let n = p.nrows();
            (0..n)
                .map(|j| (0..n).map(|k| 2.0 * (p[(j, k)].norm_sqr() + p[(k, j)].norm_sqr())).sum::<f64>())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
        * 2.0
}

struct DiagSystem<'a> {
    n: usize,
    domain: SurfaceDomain,
    ops: &'a DiffOps,
    /// `|phi_jk|^2`, node-major.
    w: Vec<f64>,
    poisson: ShiftedPoisson,
}

impl<'a> DiagSystem<'a> {
    fn new(phi: &HiggsField, ops: &'a DiffOps) -> Self {
        let n = phi.n();
        let domain = phi.domain();
        let w = phi
            .phi
            .values
            .iter()
            .flat_map(|m| (0..n * n).map(move |e| m[(e / n, e % n)].norm_sqr()))
            .collect();
        Self {
            n,
            domain,
            ops,
            w,
            poisson: ShiftedPoisson::new(&domain, 0.5, 1.0),
        }
    }

    fn components(&self, x: &[f64]) -> Vec<RealField> {
        (0..self.n)
            .map(|j| RealField {
                domain: self.domain,
                values: x.iter().skip(j).step_by(self.n).copied().collect(),
            })
            .collect()
    }

    fn interleave(&self, comps: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.domain.node_count() * self.n];
        for (j, c) in comps.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                out[i * self.n + j] = *v;
            }
        }
        out
    }

    fn project(&self, x: &mut [f64]) {
        for (node, chunk) in x.chunks_mut(self.n).enumerate() {
            if self.domain.is_boundary(node) {
                chunk.iter_mut().for_each(|v| *v = 0.0);
                continue;
            }
            let mean = chunk.iter().sum::<f64>() / self.n as f64;
            chunk.iter_mut().for_each(|v| *v -= mean);
        }
    }

    fn raw_residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let comps = self.components(x);
        let laps = comps
            .iter()
            .map(|f| self.ops.laplacian_real(f))
            .collect::<Result<Vec<_>>>()?;
        let mut r = vec![0.0; x.len()];
        for (node, chunk) in r.chunks_mut(n).enumerate() {
            if self.domain.is_boundary(node) {
                continue;
            }
            let u = &x[node * n..(node + 1) * n];
            let w = &self.w[node * n * n..(node + 1) * n * n];
            for j in 0..n {
                let mut s = -0.5 * laps[j].values[node];
                for k in 0..n {
                    if k != j {
                        s += w[j * n + k] * (2.0 * (u[j] - u[k])).exp()
                            - w[k * n + j] * (2.0 * (u[k] - u[j])).exp();
                    }
                }
                chunk[j] = s;
            }
        }
        Ok(r)
    }
}

impl System for DiagSystem<'_> {
    type State = Vec<f64>;

    fn eval(&self, x: &Vec<f64>) -> Result<Eval> {
        let vec = self.raw_residual(x)?;
        let sup = vec.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let q = self.domain.quadrature_weights();
        let terms: Vec<f64> = vec
            .chunks(self.n)
            .zip(&q)
            .map(|(ch, w)| w * ch.iter().map(|v| v * v).sum::<f64>())
            .collect();
        let l2 = (pairwise_sum(&terms) / self.domain.area()).sqrt();
        Ok(Eval { vec, sup, l2 })
    }

    fn retract(&self, x: &Vec<f64>, delta: &[f64]) -> Vec<f64> {
        x.iter().zip(delta).map(|(a, b)| a + b).collect()
    }

    fn eval_in_frame(&self, x: &Vec<f64>, delta: &[f64]) -> Result<Vec<f64>> {
        self.raw_residual(&self.retract(x, delta))
    }

    fn update_shift(&mut self, x: &Vec<f64>) {
        let n = self.n;
        let hats = (0..self.domain.node_count()).map(|node| {
            let u = &x[node * n..(node + 1) * n];
            CMat::from_fn(n, n, |j, k| c(self.w[node * n * n + j * n + k].sqrt() * (u[j] - u[k]).exp(), 0.0))
        });
        self.poisson.set_shift(commutator_shift(hats).max(1e-6));
    }

    fn precondition(&self, v: &[f64]) -> Vec<f64> {
        let comps: Vec<Vec<f64>> = self
            .components(v)
            .iter()
            .map(|f| self.poisson.apply(&f.values))
            .collect();
        let mut out = self.interleave(&comps);
        self.project(&mut out);
        out
    }

    fn size(&self, x: &Vec<f64>) -> f64 {
        x.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

struct FullSystem<'a> {
    n: usize,
    domain: SurfaceDomain,
    ops: &'a DiffOps,
    phi: &'a MatrixField,
    poisson: ShiftedPoisson,
}

impl FullSystem<'_> {
    fn flatten(&self, f: &MatrixField) -> Vec<f64> {
        f.values
            .iter()
            .flat_map(|m| m.transpose().iter().flat_map(|z| [z.re, z.im]).collect::<Vec<_>>())
            .collect()
    }

    fn unflatten(&self, v: &[f64]) -> MatrixField {
        let n = self.n;
        MatrixField {
            domain: self.domain,
            values: v
                .chunks(2 * n * n)
                .map(|ch| CMat::from_fn(n, n, |i, j| c(ch[2 * (i * n + j)], ch[2 * (i * n + j) + 1])))
                .collect(),
        }
    }

    fn project(&self, f: &mut MatrixField) {
        let n = self.n;
        for (i, m) in f.values.iter_mut().enumerate() {
            *m = if self.domain.is_boundary(i) {
                CMat::zeros(n, n)
            } else {
                project_hermitian_traceless(m)
            };
        }
    }

    /// `H0^{-1/2} (H R) H0^{-1/2}`, Hermitian for any fixed `H0`.
    fn framed(&self, h0: &HermitianMetricField, h: &HermitianMetricField, r: &MatrixField) -> Vec<f64> {
        let mut g = MatrixField::from_fn(self.domain, |i| {
            let s = h0.power_at(i, -0.5);
            &s * h.power_at(i, 1.0) * &r.values[i] * &s
        });
        self.project(&mut g);
        self.flatten(&g)
    }
}

impl System for FullSystem<'_> {
    type State = HermitianMetricField;

    fn eval(&self, x: &HermitianMetricField) -> Result<Eval> {
        let r = curvature_plus_commutator(x, self.phi, self.ops)?;
        let (sup, l2) = matrix_norms(&r);
        Ok(Eval {
            vec: self.framed(x, x, &r),
            sup,
            l2,
        })
    }

    fn retract(&self, x: &HermitianMetricField, delta: &[f64]) -> HermitianMetricField {
        let d = self.unflatten(delta);
        let s = MatrixField::from_fn(self.domain, |i| {
            let root = x.power_at(i, 0.5);
            let h = &root * crate::linalg::hermitian_apply(&d.values[i], f64::exp) * &root;
            crate::linalg::hermitian_apply(&h, f64::ln)
        });
        HermitianMetricField::full(s)
    }

    fn eval_in_frame(&self, x: &HermitianMetricField, delta: &[f64]) -> Result<Vec<f64>> {
        let y = self.retract(x, delta);
        let r = curvature_plus_commutator(&y, self.phi, self.ops)?;
        Ok(self.framed(x, &y, &r))
    }

    fn update_shift(&mut self, x: &HermitianMetricField) {
        let hats = (0..self.domain.node_count())
            .map(|i| x.power_at(i, 0.5) * &self.phi.values[i] * x.power_at(i, -0.5));
        self.poisson.set_shift(0.5 * commutator_shift(hats).max(1e-6));
    }

    fn precondition(&self, v: &[f64]) -> Vec<f64> {
        let stride = 2 * self.n * self.n;
        let nodes = self.domain.node_count();
        let mut out = vec![0.0; v.len()];
        for comp in 0..stride {
            let plane: Vec<f64> = (0..nodes).map(|i| v[i * stride + comp]).collect();
            for (i, y) in self.poisson.apply(&plane).into_iter().enumerate() {
                out[i * stride + comp] = y;
            }
        }
        let mut f = self.unflatten(&out);
        self.project(&mut f);
        self.flatten(&f)
    }

    fn size(&self, x: &HermitianMetricField) -> f64 {
        match x {
            HermitianMetricField::Full(s) => 0.5 * s.values.iter().map(max_abs).fold(0.0, f64::max),
            HermitianMetricField::Diagonal(u) => u.iter().map(RealField::sup_norm).fold(0.0, f64::max),
        }
    }
}

struct RunSummary {
    status: SolveStatus,
    iterations: usize,
    newton_steps: usize,
    sup: f64,
    l2: f64,
    history: Vec<f64>,
    message: Option<String>,
}

fn iterate<Sys: System>(
    sys: &mut Sys,
    mut x: Sys::State,
    params: &SolverParams,
) -> Result<(Sys::State, RunSummary)> {
    let mut e = sys.eval(&x)?;
    let mut history = vec![e.l2];
    let mut newton_steps = 0;
    let mut newton_mode = params.method == Method::Newton;
    let mut status = SolveStatus::MaxIter;
    let mut message = None;
    let mut iterations = 0;
    let mut failures = 0;
    while iterations <= params.max_iter {
        if e.sup < params.tol {
            status = SolveStatus::Converged;
            break;
        }
        if !e.l2.is_finite() || sys.size(&x) > params.divergence_bound {
            status = SolveStatus::Diverged;
            message = Some(format!(
                "metric exponent reached {:.3e} (bound {})",
                sys.size(&x),
                params.divergence_bound
            ));
            break;
        }
        if iterations == params.max_iter {
            break;
        }
        sys.update_shift(&x);
        let mut accepted = None;
        if newton_mode {
            let direction = newton_direction(sys, &x, &e)?;
            accepted = line_search(sys, &x, &e, &direction, 1.0)?;
            if accepted.is_some() {
                newton_steps += 1;
            }
        }
        if accepted.is_none() {
            let p = sys.precondition(&e.vec);
            let direction: Vec<f64> = p.iter().map(|v| -v).collect();
            accepted = line_search(sys, &x, &e, &direction, params.dt)?;
            if let Some((_, e_new)) = &accepted {
                if params.method == Method::Auto && e_new.l2 > 0.5 * e.l2 {
                    newton_mode = true;
                }
            }
        }
        iterations += 1;
        match accepted {
            Some((x_new, e_new)) => {
                failures = 0;
                x = x_new;
                e = e_new;
                history.push(e.l2);
            }
            None => {
                failures += 1;
                if params.method == Method::Auto {
                    newton_mode = !newton_mode;
                }
                if failures >= 3 {
                    status = SolveStatus::Diverged;
                    message = Some(format!(
                        "line search failed to reduce the residual (L2 {:.3e}, sup {:.3e})",
                        e.l2, e.sup
                    ));
                    break;
                }
            }
        }
    }
    Ok((x, RunSummary {
        status,
        iterations,
        newton_steps,
        sup: e.sup,
        l2: e.l2,
        history,
        message,
    }))
}

fn newton_direction<Sys: System>(sys: &Sys, x: &Sys::State, e: &Eval) -> Result<Vec<f64>> {
    let mut failure = None;
    let apply = |v: &[f64]| -> Vec<f64> {
        let vmax = v.iter().map(|a| a.abs()).fold(0.0, f64::max);
        if vmax == 0.0 {
            return vec![0.0; v.len()];
        }
        let eps = 1e-7 / vmax;
        let dv: Vec<f64> = v.iter().map(|a| a * eps).collect();
        match sys.eval_in_frame(x, &dv) {
            Ok(r) => r.iter().zip(&e.vec).map(|(a, b)| (a - b) / eps).collect(),
            Err(err) => {
                failure.get_or_insert(err);
                vec![0.0; v.len()]
            }
        }
    };
    let rhs: Vec<f64> = e.vec.iter().map(|v| -v).collect();
    let forcing = (norm(&rhs) / (e.vec.len() as f64).sqrt()).clamp(1e-10, 1e-2);
    let (d, _info) = gmres(apply, |v| sys.precondition(v), &rhs, forcing, 30, 150);
    if let Some(err) = failure {
        return Err(err);
    }
    Ok(d)
}

#[allow(clippy::type_complexity)]
fn line_search<Sys: System>(
    sys: &Sys,
    x: &Sys::State,
    e: &Eval,
    direction: &[f64],
    initial: f64,
) -> Result<Option<(Sys::State, Eval)>> {
    let mut lambda = initial;
    for _ in 0..12 {
        let step: Vec<f64> = direction.iter().map(|d| d * lambda).collect();
        let y = sys.retract(x, &step);
        let ey = sys.eval(&y)?;
        if ey.l2.is_finite() && ey.l2 <= (1.0 - 1e-4 * lambda) * e.l2 {
            return Ok(Some((y, ey)));
        }
        lambda *= 0.5;
    }
    Ok(None)
}

/// Whether the diagonal ansatz is exact for this field.
pub fn diagonal_path_applies(phi: &HiggsField) -> bool {
    phi.origin == Origin::HitchinSection && (phi.is_cyclic() || phi.n() == 2)
}

/// Replaces the boundary ring of `init` by the fiducial metric (patch only).
fn impose_boundary(phi: &HiggsField, init: HermitianMetricField) -> HermitianMetricField {
    let d = phi.domain();
    if d.is_torus() {
        return init;
    }
    let fid = fiducial_metric(phi).metric;
    match (init, fid) {
        (HermitianMetricField::Diagonal(mut u), HermitianMetricField::Diagonal(f)) => {
            for (uj, fj) in u.iter_mut().zip(&f) {
                for i in 0..d.node_count() {
                    if d.is_boundary(i) {
                        uj.values[i] = fj.values[i];
                    }
                }
            }
            HermitianMetricField::Diagonal(u)
        }
        (init, fid) => {
            let mut s = init.log_matrices();
            let fs = fid.log_matrices();
            for i in 0..d.node_count() {
                if d.is_boundary(i) {
                    s.values[i] = fs.values[i].clone();
                }
            }
            HermitianMetricField::Full(s)
        }
    }
}

/// Default initial metric: the fiducial metric where defined, identity otherwise.
pub fn default_init(phi: &HiggsField) -> HermitianMetricField {
    fiducial_metric(phi).metric
}

/// Solves the self-duality equations for the harmonic metric.
pub fn solve_harmonic_metric(
    phi: &HiggsField,
    init: &HermitianMetricField,
    params: &SolverParams,
) -> Result<(HermitianMetricField, SolveOutcome)> {
    let start = Instant::now();
    sign_self_test().map_err(|m| Error::Precondition(format!("sign self-test failed: {m}")))?;
    if init.domain() != phi.domain() {
        return Err(Error::DomainMismatch);
    }
    if init.dim() != phi.n() {
        return Err(Error::DimensionMismatch(format!(
            "metric is {0}x{0}, field is {1}x{1}",
            init.dim(),
            phi.n()
        )));
    }
    let ops = DiffOps::new(&phi.domain())?;
    let init = impose_boundary(phi, init.clone());
    let diagonal_ok = init.is_diagonal() || init.off_diagonal_sup() == 0.0;
    let use_diag = match params.path {
        PathChoice::Auto => diagonal_path_applies(phi) && diagonal_ok,
        PathChoice::Diagonal => {
            if !diagonal_path_applies(phi) {
                return Err(Error::Precondition(
                    "the diagonal path needs a cyclic Hitchin-section field or n = 2".into(),
                ));
            }
            true
        }
        PathChoice::Full => false,
    };
    let init = if use_diag {
        as_diagonal(&init)
    } else {
        init.to_full()
    };

    if let Some(obs) = detect_obstruction(phi, &init, &ops)? {
        let res = residual(&init, phi, &ops)?;
        let outcome = SolveOutcome {
            status: SolveStatus::Obstructed,
            iterations: 0,
            newton_steps: 0,
            residual_sup: res.sup,
            residual_l2: res.l2,
            path: if use_diag { "diagonal" } else { "full" }.into(),
            message: Some(format!(
                "phi preserves a rank-{} subbundle; the integral of the complementary partial trace is {:.6e} and cannot vanish",
                phi.n() - obs.block,
                obs.integral
            )),
            obstruction: Some(obs),
            l2_history: vec![res.l2],
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        return Ok((init, outcome));
    }

    let (metric, run, path) = if use_diag {
        let mut sys = DiagSystem::new(phi, &ops);
        let HermitianMetricField::Diagonal(u) = &init else { unreachable!() };
        let n = phi.n();
        let mut x = vec![0.0; phi.domain().node_count() * n];
        for (j, f) in u.iter().enumerate() {
            for (i, v) in f.values.iter().enumerate() {
                x[i * n + j] = *v;
            }
        }
        let (state, run) = iterate(&mut sys, x, params)?;
        let comps = sys.components(&state);
        (HermitianMetricField::diagonal(comps)?, run, "diagonal")
    } else {
        let mut sys = FullSystem {
            n: phi.n(),
            domain: phi.domain(),
            ops: &ops,
            phi: &phi.phi,
            poisson: ShiftedPoisson::new(&phi.domain(), 0.25, 1.0),
        };
        let (state, run) = iterate(&mut sys, init, params)?;
        (state, run, "full")
    };
    let outcome = SolveOutcome {
        status: run.status,
        iterations: run.iterations,
        newton_steps: run.newton_steps,
        residual_sup: run.sup,
        residual_l2: run.l2,
        path: path.into(),
        obstruction: None,
        message: run.message,
        l2_history: run.history,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((metric, outcome))
}

fn as_diagonal(h: &HermitianMetricField) -> HermitianMetricField {
    match h {
        HermitianMetricField::Diagonal(_) => h.clone(),
        HermitianMetricField::Full(s) => {
            let n = s.dim();
            HermitianMetricField::Diagonal(
                (0..n)
                    .map(|j| s.map(|m| 0.5 * m[(j, j)].re))
                    .collect(),
            )
        }
    }
}
