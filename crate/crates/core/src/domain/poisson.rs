use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::ops::{torus_laplacian_symbol, Fft2};
use super::{Shape, SurfaceDomain};

/// Inverse of `a (-Delta) + c` with `a > 0`, `c >= 0`.
///
/// Torus: spectral Laplacian; a zero shift annihilates the mean mode.
/// Patch: standard 5-point Laplacian with homogeneous Dirichlet data, solved
/// exactly with the sine transform; boundary entries of the output are zero.
pub struct ShiftedPoisson {
    domain: SurfaceDomain,
    a: f64,
    c: f64,
    kernel: Kernel,
}

enum Kernel {
    Torus { fft: Fft2, neg_lap: Vec<f64> },
    Patch { m: usize, dst: Dst, neg_lap1: Vec<f64> },
}

impl ShiftedPoisson {
    pub fn new(domain: &SurfaceDomain, a: f64, c: f64) -> Self {
        let kernel = match domain.shape {
            Shape::Torus { tau } => Kernel::Torus {
                fft: Fft2::new(domain.resolution),
                neg_lap: torus_laplacian_symbol(domain.resolution, tau)
                    .into_iter()
                    .map(|x| -x)
                    .collect(),
            },
            Shape::Patch { .. } => {
                let n = domain.resolution;
                let h = domain.spacing();
                let neg_lap1 = (1..n)
                    .map(|k| {
                        let s = (PI * k as f64 / (2.0 * n as f64)).sin();
                        4.0 * s * s / (h * h)
                    })
                    .collect();
                Kernel::Patch {
                    m: n - 1,
                    dst: Dst::new(n),
                    neg_lap1,
                }
            }
        };
        Self {
            domain: *domain,
            a,
            c,
            kernel,
        }
    }

    pub fn set_shift(&mut self, c: f64) {
        self.c = c;
    }

    pub fn apply(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.domain.node_count());
        match &self.kernel {
            Kernel::Torus { fft, neg_lap } => {
                let mut data: Vec<Complex64> =
                    rhs.iter().map(|x| Complex64::new(*x, 0.0)).collect();
                fft.forward(&mut data);
                for (d, l) in data.iter_mut().zip(neg_lap) {
                    let denom = self.a * l + self.c;
                    if denom == 0.0 {
                        *d = Complex64::new(0.0, 0.0);
                    } else {
                        *d /= denom;
                    }
                }
                fft.inverse(&mut data);
                data.into_iter().map(|z| z.re).collect()
            }
            Kernel::Patch { m, dst, neg_lap1 } => {
                let m = *m;
                let side = m + 2;
                let mut inner = vec![0.0; m * m];
                for r in 0..m {
                    for c in 0..m {
                        inner[r * m + c] = rhs[(r + 1) * side + c + 1];
                    }
                }
                dst.apply_2d(&mut inner);
                for r in 0..m {
                    for c in 0..m {
                        inner[r * m + c] /= self.a * (neg_lap1[r] + neg_lap1[c]) + self.c;
                    }
                }
                dst.apply_2d(&mut inner);
                let norm = (2.0 / (m + 1) as f64).powi(2);
                let mut out = vec![0.0; side * side];
                for r in 0..m {
                    for c in 0..m {
                        out[(r + 1) * side + c + 1] = inner[r * m + c] * norm;
                    }
                }
                out
            }
        }
    }
}

/// DST-I of length `n - 1` via a complex FFT of length `2n`.
struct Dst {
    n: usize,
    plan: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl Dst {
    fn new(n: usize) -> Self {
        let mut planner = rustfft::FftPlanner::new();
        Self {
            n,
            plan: planner.plan_fft_forward(2 * n),
        }
    }

    /// `S_k = sum_j x_j sin(pi j k / n)`, `j, k = 1..n-1`.
    fn apply_1d(&self, x: &mut [f64]) {
        let n = self.n;
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * n];
        for (j, v) in x.iter().enumerate() {
            buf[j + 1] = Complex64::new(*v, 0.0);
            buf[2 * n - j - 1] = Complex64::new(-*v, 0.0);
        }
        self.plan.process(&mut buf);
        for (k, v) in x.iter_mut().enumerate() {
            // FFT of the odd extension is -2i S_k.
            *v = (buf[k + 1] * Complex64::new(0.0, 0.5)).re;
        }
    }

    fn apply_2d(&self, data: &mut [f64]) {
        let m = self.n - 1;
        data.par_chunks_mut(m).for_each(|row| self.apply_1d(row));
        let mut t = vec![0.0; m * m];
        for r in 0..m {
            for c in 0..m {
                t[c * m + r] = data[r * m + c];
            }
        }
        t.par_chunks_mut(m).for_each(|row| self.apply_1d(row));
        for r in 0..m {
            for c in 0..m {
                data[r * m + c] = t[c * m + r];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{DiffOps, RealField};

    #[test]
    fn dst_matches_direct_sum() {
        let n = 8;
        let dst = Dst::new(n);
        let x: Vec<f64> = (1..n).map(|j| (j as f64 * 0.37).sin() + 0.1 * j as f64).collect();
        let mut y = x.clone();
        dst.apply_1d(&mut y);
        for k in 1..n {
            let want: f64 = (1..n)
                .map(|j| x[j - 1] * (PI * (j * k) as f64 / n as f64).sin())
                .sum();
            assert!((y[k - 1] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn torus_inverse_matches_operator() {
        let d = SurfaceDomain::square_torus(32).unwrap();
        let ops = DiffOps::new(&d).unwrap();
        let p = ShiftedPoisson::new(&d, 0.5, 3.0);
        let f = RealField::from_fn(d, |i| {
            let (s, t) = d.grid_coords(i);
            (2.0 * PI * s).sin() * (4.0 * PI * t).cos() + 0.2
        });
        let v = RealField::new(d, p.apply(&f.values)).unwrap();
        let lap = ops.laplacian_real(&v).unwrap();
        for i in 0..d.node_count() {
            let back = -0.5 * lap.values[i] + 3.0 * v.values[i];
            assert!((back - f.values[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn patch_inverse_matches_five_point() {
        let d = SurfaceDomain::patch(16, 1.0).unwrap();
        let p = ShiftedPoisson::new(&d, 1.0, 0.5);
        let side = d.side();
        let h = d.spacing();
        let rhs: Vec<f64> = (0..d.node_count())
            .map(|i| if d.is_boundary(i) { 0.0 } else { (i as f64 * 0.13).cos() })
            .collect();
        let v = p.apply(&rhs);
        for r in 1..side - 1 {
            for c in 1..side - 1 {
                let i = r * side + c;
                let lap = (v[i - 1] + v[i + 1] + v[i - side] + v[i + side] - 4.0 * v[i]) / (h * h);
                assert!((-lap + 0.5 * v[i] - rhs[i]).abs() < 1e-10);
            }
        }
    }
}
