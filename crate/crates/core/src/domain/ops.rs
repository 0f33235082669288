use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::{GridField, RealField, ScalarField, Shape, SurfaceDomain};
use crate::error::{Error, Result};
use crate::linalg::I;

/// Coordinate differential operators `d/dz`, `d/dzbar` and the flat Laplacian
/// `4 d/dz d/dzbar` for one domain.
pub struct DiffOps {
    domain: SurfaceDomain,
    backend: Backend,
}

enum Backend {
    Spectral(Spectral),
    Stencil(Stencil),
}

impl DiffOps {
    pub fn new(domain: &SurfaceDomain) -> Result<Self> {
        let backend = match domain.shape {
            Shape::Torus { tau } => Backend::Spectral(Spectral::new(domain.resolution, tau)?),
            Shape::Patch { .. } => Backend::Stencil(Stencil::new(domain.side(), domain.spacing())?),
        };
        Ok(Self {
            domain: *domain,
            backend,
        })
    }

    pub fn domain(&self) -> &SurfaceDomain {
        &self.domain
    }

    fn check(&self, f: &ScalarField) -> Result<()> {
        if f.domain != self.domain {
            return Err(Error::DomainMismatch);
        }
        Ok(())
    }

    pub fn d_dz(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        let values = match &self.backend {
            Backend::Spectral(s) => s.apply(&f.values, &s.sym_dz),
            Backend::Stencil(s) => {
                let dx = s.first_x(&f.values);
                let dy = s.first_y(&f.values);
                dx.iter().zip(&dy).map(|(a, b)| (a - I * b) * 0.5).collect()
            }
        };
        Ok(GridField {
            domain: self.domain,
            values,
        })
    }

    pub fn d_dzbar(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        let values = match &self.backend {
            Backend::Spectral(s) => s.apply(&f.values, &s.sym_dzbar),
            Backend::Stencil(s) => {
                let dx = s.first_x(&f.values);
                let dy = s.first_y(&f.values);
                dx.iter().zip(&dy).map(|(a, b)| (a + I * b) * 0.5).collect()
            }
        };
        Ok(GridField {
            domain: self.domain,
            values,
        })
    }

    /// Flat Laplacian `d^2/dx^2 + d^2/dy^2`.
    pub fn laplacian(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        let values = match &self.backend {
            Backend::Spectral(s) => s.apply(&f.values, &s.sym_lap),
            Backend::Stencil(s) => {
                let xx = s.second_x(&f.values);
                let yy = s.second_y(&f.values);
                xx.iter().zip(&yy).map(|(a, b)| a + b).collect()
            }
        };
        Ok(GridField {
            domain: self.domain,
            values,
        })
    }

    /// `d/dx` with `z = x + i y`.
    pub fn d_dx(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        let values = match &self.backend {
            Backend::Spectral(s) => {
                let sym: Vec<Complex64> = s
                    .sym_dz
                    .iter()
                    .zip(&s.sym_dzbar)
                    .map(|(a, b)| a + b)
                    .collect();
                s.apply(&f.values, &sym)
            }
            Backend::Stencil(s) => s.first_x(&f.values),
        };
        Ok(GridField {
            domain: self.domain,
            values,
        })
    }

    /// `d/dy` with `z = x + i y`.
    pub fn d_dy(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        let values = match &self.backend {
            Backend::Spectral(s) => {
                let sym: Vec<Complex64> = s
                    .sym_dz
                    .iter()
                    .zip(&s.sym_dzbar)
                    .map(|(a, b)| I * (a - b))
                    .collect();
                s.apply(&f.values, &sym)
            }
            Backend::Stencil(s) => s.first_y(&f.values),
        };
        Ok(GridField {
            domain: self.domain,
            values,
        })
    }

    pub fn laplacian_real(&self, f: &RealField) -> Result<RealField> {
        Ok(self.laplacian(&f.to_complex())?.re())
    }

    pub fn d_dx_real(&self, f: &RealField) -> Result<RealField> {
        Ok(self.d_dx(&f.to_complex())?.re())
    }

    pub fn d_dy_real(&self, f: &RealField) -> Result<RealField> {
        Ok(self.d_dy(&f.to_complex())?.re())
    }
}

/// Signed frequency of FFT bin `k`, `None` at the Nyquist bin.
pub(super) fn frequency(k: usize, n: usize) -> Option<f64> {
    if 2 * k == n {
        None
    } else if 2 * k < n {
        Some(k as f64)
    } else {
        Some(k as f64 - n as f64)
    }
}

/// Squared frequency including the Nyquist bin.
pub(super) fn frequency_sq(k: usize, n: usize) -> f64 {
    let m = if 2 * k <= n { k as f64 } else { k as f64 - n as f64 };
    m * m
}

/// Symbol of the flat Laplacian on the torus with lattice `Z + tau Z`.
///
/// `Delta = (d_t^2 - 2 Re(tau) d_s d_t + |tau|^2 d_s^2) / Im(tau)^2`; the
/// mixed term is dropped when either index sits on the Nyquist bin.
pub(super) fn torus_laplacian_symbol(n: usize, tau: Complex64) -> Vec<f64> {
    let two_pi = 2.0 * PI;
    let im2 = tau.im * tau.im;
    let mut sym = vec![0.0; n * n];
    for row in 0..n {
        for col in 0..n {
            let tt = -two_pi * two_pi * frequency_sq(row, n);
            let ss = -two_pi * two_pi * frequency_sq(col, n);
            let st = match (frequency(col, n), frequency(row, n)) {
                (Some(m), Some(l)) => -two_pi * two_pi * m * l,
                _ => 0.0,
            };
            sym[row * n + col] = (tt - 2.0 * tau.re * st + tau.norm_sqr() * ss) / im2;
        }
    }
    sym
}

pub(super) struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub(super) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    fn rows(&self, data: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inv } else { &self.fwd };
        data.par_chunks_mut(self.n).for_each(|row| plan.process(row));
    }

    fn transpose(&self, data: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for c in 0..n {
                out[c * n + r] = data[r * n + c];
            }
        }
        out
    }

    pub(super) fn forward(&self, data: &mut Vec<Complex64>) {
        self.rows(data, false);
        let mut t = self.transpose(data);
        self.rows(&mut t, false);
        *data = self.transpose(&t);
    }

    /// Normalized inverse.
    pub(super) fn inverse(&self, data: &mut Vec<Complex64>) {
        self.rows(data, true);
        let mut t = self.transpose(data);
        self.rows(&mut t, true);
        *data = self.transpose(&t);
        let scale = 1.0 / (self.n * self.n) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

struct Spectral {
    fft: Fft2,
    sym_dz: Vec<Complex64>,
    sym_dzbar: Vec<Complex64>,
    sym_lap: Vec<Complex64>,
}

impl Spectral {
    fn new(n: usize, tau: Complex64) -> Result<Self> {
        if n < super::MIN_RESOLUTION || !n.is_power_of_two() {
            return Err(Error::InvalidDomain(format!(
                "spectral operators need a power-of-two resolution >= {}, got {n}",
                super::MIN_RESOLUTION
            )));
        }
        // z = s + t tau, so d_z = (d_t - conj(tau) d_s) / (tau - conj(tau)) and
        // d_zbar = (d_t - tau d_s) / (conj(tau) - tau).
        let two_pi_i = Complex64::new(0.0, 2.0 * PI);
        let denom = tau - tau.conj();
        let mut sym_dz = vec![Complex64::new(0.0, 0.0); n * n];
        let mut sym_dzbar = sym_dz.clone();
        for row in 0..n {
            for col in 0..n {
                let (Some(m), Some(l)) = (frequency(col, n), frequency(row, n)) else {
                    continue;
                };
                let ds = two_pi_i * m;
                let dt = two_pi_i * l;
                sym_dz[row * n + col] = (dt - tau.conj() * ds) / denom;
                sym_dzbar[row * n + col] = (dt - tau * ds) / (-denom);
            }
        }
        let sym_lap = torus_laplacian_symbol(n, tau)
            .into_iter()
            .map(|x| Complex64::new(x, 0.0))
            .collect();
        Ok(Self {
            fft: Fft2::new(n),
            sym_dz,
            sym_dzbar,
            sym_lap,
        })
    }

    fn apply(&self, values: &[Complex64], sym: &[Complex64]) -> Vec<Complex64> {
        let mut data = values.to_vec();
        self.fft.forward(&mut data);
        for (d, s) in data.iter_mut().zip(sym) {
            *d *= s;
        }
        self.fft.inverse(&mut data);
        data
    }
}

/// Finite-difference weights for derivatives of order `0..=m` at `x0`
/// (Fornberg's recursion). `weights[k][j]` multiplies `f(nodes[j])`.
pub(crate) fn fornberg(x0: f64, nodes: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// One stencil: first node index and weights in unit spacing.
#[derive(Clone, Debug)]
struct Tap {
    start: usize,
    weights: Vec<f64>,
}

/// 4th-order central differences; 6-point one-sided stencils on the two
/// outermost nodes of each side.
struct Stencil {
    side: usize,
    h: f64,
    first: Vec<Tap>,
    second: Vec<Tap>,
}

impl Stencil {
    fn new(side: usize, h: f64) -> Result<Self> {
        if side < 6 {
            return Err(Error::InvalidDomain(format!(
                "4th-order stencils need at least 6 nodes per axis, got {side}"
            )));
        }
        let mut first = Vec::with_capacity(side);
        let mut second = Vec::with_capacity(side);
        for p in 0..side {
            let start = if p < 2 {
                0
            } else if p + 2 >= side {
                side - 6
            } else {
                p - 2
            };
            let len = if p < 2 || p + 2 >= side { 6 } else { 5 };
            let nodes: Vec<f64> = (start..start + len).map(|k| k as f64).collect();
            let w = fornberg(p as f64, &nodes, 2);
            first.push(Tap {
                start,
                weights: w[1].clone(),
            });
            second.push(Tap {
                start,
                weights: w[2].clone(),
            });
        }
        Ok(Self {
            side,
            h,
            first,
            second,
        })
    }

    fn along_x(&self, f: &[Complex64], taps: &[Tap], scale: f64) -> Vec<Complex64> {
        let n = self.side;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        out.par_chunks_mut(n).enumerate().for_each(|(r, row)| {
            let src = &f[r * n..(r + 1) * n];
            for (c, o) in row.iter_mut().enumerate() {
                let tap = &taps[c];
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, w) in tap.weights.iter().enumerate() {
                    acc += src[tap.start + k] * *w;
                }
                *o = acc * scale;
            }
        });
        out
    }

    fn along_y(&self, f: &[Complex64], taps: &[Tap], scale: f64) -> Vec<Complex64> {
        let n = self.side;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        out.par_chunks_mut(n).enumerate().for_each(|(r, row)| {
            let tap = &taps[r];
            for (c, o) in row.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, w) in tap.weights.iter().enumerate() {
                    acc += f[(tap.start + k) * n + c] * *w;
                }
                *o = acc * scale;
            }
        });
        out
    }

    fn first_x(&self, f: &[Complex64]) -> Vec<Complex64> {
        self.along_x(f, &self.first, 1.0 / self.h)
    }

    fn first_y(&self, f: &[Complex64]) -> Vec<Complex64> {
        self.along_y(f, &self.first, 1.0 / self.h)
    }

    fn second_x(&self, f: &[Complex64]) -> Vec<Complex64> {
        self.along_x(f, &self.second, 1.0 / (self.h * self.h))
    }

    fn second_y(&self, f: &[Complex64]) -> Vec<Complex64> {
        self.along_y(f, &self.second, 1.0 / (self.h * self.h))
    }
}
