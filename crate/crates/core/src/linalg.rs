//! Small dense complex matrix helpers and deterministic reductions.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Elementary matrix with a single one at `(row, col)`.
pub fn elementary(n: usize, row: usize, col: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    m[(row, col)] = Complex64::new(1.0, 0.0);
    m
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn trace(a: &CMat) -> Complex64 {
    a.diagonal().iter().sum()
}

/// Largest entry modulus.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Applies a real function to a Hermitian matrix through its eigendecomposition.
///
/// The input is symmetrized first so round-off asymmetry never leaks into the
/// spectrum.
pub fn hermitian_apply(a: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let sym = (a + a.adjoint()).scale(0.5);
    let eig = nalgebra::linalg::SymmetricEigen::new(sym);
    let mut d = eig.eigenvectors.clone();
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        let fj = f(*lambda);
        for i in 0..d.nrows() {
            d[(i, j)] *= fj;
        }
    }
    d * eig.eigenvectors.adjoint()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    let sym = (a + a.adjoint()).scale(0.5);
    let mut v: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Numerical rank of a complex matrix by singular values relative to the largest.
pub fn rank(a: &CMat, rel_tol: f64) -> usize {
    let sv = a.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > rel_tol * smax).count()
}

/// Fixed-order pairwise summation.
///
/// The split points depend only on the slice length, so the result is
/// bit-identical regardless of how the inputs were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        let mut s = 0.0;
        for x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_apply_recovers_exp_log() {
        let mut a = CMat::zeros(3, 3);
        a[(0, 0)] = c(0.3, 0.0);
        a[(1, 1)] = c(-0.1, 0.0);
        a[(2, 2)] = c(-0.2, 0.0);
        a[(0, 1)] = c(0.1, 0.2);
        a[(1, 0)] = c(0.1, -0.2);
        a[(1, 2)] = c(0.0, -0.05);
        a[(2, 1)] = c(0.0, 0.05);
        let e = hermitian_apply(&a, f64::exp);
        let back = hermitian_apply(&e, f64::ln);
        assert!(max_abs(&(back - &a)) < 1e-13);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
    }

    #[test]
    fn rank_of_elementary() {
        assert_eq!(rank(&elementary(3, 0, 2), 1e-12), 1);
        assert_eq!(rank(&CMat::identity(4, 4), 1e-12), 4);
    }
}
