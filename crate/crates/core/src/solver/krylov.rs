//! Restarted right-preconditioned GMRES with deterministic inner products.

use crate::linalg::pairwise_sum;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    pairwise_sum(&prods)
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Copy, Debug)]
#[allow(dead_code)]
pub(crate) struct GmresInfo {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Approximately solves `A x = b` starting from `x = 0`, with `A` applied as
/// `A (M y)` for the preconditioner `M`.
pub(crate) fn gmres(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    rel_tol: f64,
    restart: usize,
    max_iter: usize,
) -> (Vec<f64>, GmresInfo) {
    let len = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; len];
    if bnorm == 0.0 {
        return (
            x,
            GmresInfo {
                iterations: 0,
                rel_residual: 0.0,
            },
        );
    }
    let mut total = 0;
    let mut r = b.to_vec();
    let mut rnorm = bnorm;
    while total < max_iter {
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|x| x / rnorm).collect()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = rnorm;
        let mut k = 0;
        while k < restart && total < max_iter {
            let mut w = apply(&precond(&v[k]));
            for (i, vi) in v.iter().enumerate() {
                h[i][k] = dot(&w, vi);
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= h[i][k] * vj;
                }
            }
            h[k + 1][k] = norm(&w);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / denom;
                sn[k] = h[k + 1][k] / denom;
            }
            let next = h[k + 1][k];
            h[k][k] = cs[k] * h[k][k] + sn[k] * next;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k += 1;
            if g[k].abs() <= rel_tol * bnorm || next == 0.0 {
                break;
            }
            v.push(w.iter().map(|x| x / next).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = g[i] - (i + 1..k).map(|j| h[i][j] * y[j]).sum::<f64>();
            y[i] = s / h[i][i];
        }
        let mut z = vec![0.0; len];
        for (yi, vi) in y.iter().zip(&v) {
            for (zj, vj) in z.iter_mut().zip(vi) {
                *zj += yi * vj;
            }
        }
        for (xj, dj) in x.iter_mut().zip(precond(&z)) {
            *xj += dj;
        }
        let ax = apply(&x);
        r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        rnorm = norm(&r);
        if rnorm <= rel_tol * bnorm {
            break;
        }
    }
    (
        x,
        GmresInfo {
            iterations: total,
            rel_residual: rnorm / bnorm,
        },
    )
}
