//! Principal sl(2) data for sl(n, C) in the vector representation.
//!
//! Brackets follow the relations `[x, e_-1] = -e_-1`, `[x, e_1] = e_1`,
//! `[e_-1, e_1] = x`. With `e_-1` the subdiagonal of ones this forces the
//! superdiagonal of `e_1` to be negative.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{commutator, elementary, frobenius, max_abs, rank, trace, CMat};

pub const MIN_RANK: usize = 2;
pub const MAX_RANK: usize = 8;

#[derive(Clone, Debug)]
pub struct LieBasis {
    pub n: usize,
    /// Semisimple element, diagonal.
    pub x: CMat,
    /// Raising element `e_1`.
    pub e1: CMat,
    /// Lowering element `e_-1`.
    pub em1: CMat,
    /// Highest-weight vectors `e_k = e_1^k`, `k = 1..n-1`.
    pub hw: Vec<CMat>,
    pub exponents: Vec<i32>,
    /// Basis of each ad(x)-eigenspace `g_i`, `i` in `-(n-1)..=(n-1)`.
    pub weight_spaces: BTreeMap<i32, Vec<CMat>>,
}

impl LieBasis {
    /// Largest exponent `M = n - 1`.
    pub fn max_weight(&self) -> i32 {
        self.n as i32 - 1
    }

    /// Highest-weight vector `e_k` (1-based, as in `alpha_k`).
    pub fn e(&self, k: usize) -> &CMat {
        &self.hw[k - 1]
    }
}

pub fn construct_principal_sl2(n: usize) -> Result<LieBasis> {
    if !(MIN_RANK..=MAX_RANK).contains(&n) {
        return Err(Error::RankOutOfRange(n));
    }
    let half = (n as f64 - 1.0) / 2.0;
    let diag: Vec<f64> = (0..n).map(|i| half - i as f64).collect();

    let mut x = CMat::zeros(n, n);
    for (i, d) in diag.iter().enumerate() {
        x[(i, i)] = Complex64::new(*d, 0.0);
    }
    let mut em1 = CMat::zeros(n, n);
    for i in 0..n - 1 {
        em1[(i + 1, i)] = Complex64::new(1.0, 0.0);
    }
    // [em1, e1]_jj = c_{j-1} - c_j must equal x_jj, so c_j is minus the
    // running sum of the diagonal of x.
    let mut e1 = CMat::zeros(n, n);
    let mut running = 0.0;
    for i in 0..n - 1 {
        running += diag[i];
        e1[(i, i + 1)] = Complex64::new(-running, 0.0);
    }

    let mut basis = LieBasis {
        n,
        x,
        e1,
        em1,
        hw: Vec::new(),
        exponents: (1..n as i32).collect(),
        weight_spaces: BTreeMap::new(),
    };
    basis.hw = highest_weight_vectors(&basis);
    basis.weight_spaces = weight_decomposition(&basis);
    Ok(basis)
}

/// Powers `e_1^k` for `k = 1..n-1`.
pub fn highest_weight_vectors(basis: &LieBasis) -> Vec<CMat> {
    let mut out = Vec::with_capacity(basis.n - 1);
    let mut p = basis.e1.clone();
    for _ in 1..basis.n {
        out.push(p.clone());
        p = &p * &basis.e1;
    }
    out
}

/// Standard basis of sl(n) sorted by ad(x)-weight. `E_ij` has weight
/// `j - i`; the Cartan part is spanned by `E_ii - E_{i+1,i+1}`.
pub fn weight_decomposition(basis: &LieBasis) -> BTreeMap<i32, Vec<CMat>> {
    let n = basis.n;
    let mut spaces: BTreeMap<i32, Vec<CMat>> = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let w = j as i32 - i as i32;
                spaces.entry(w).or_default().push(elementary(n, i, j));
            }
        }
    }
    let cartan: Vec<CMat> = (0..n - 1)
        .map(|i| elementary(n, i, i) - elementary(n, i + 1, i + 1))
        .collect();
    spaces.insert(0, cartan);
    spaces
}

/// Trace pairing scaled by the metric normalization `kappa`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceForm {
    pub kappa: f64,
}

impl Default for TraceForm {
    fn default() -> Self {
        Self { kappa: 1.0 }
    }
}

impl TraceForm {
    pub fn new(kappa: f64) -> Self {
        Self { kappa }
    }

    /// Killing form of sl(n) is `2n` times the trace form.
    pub fn killing(n: usize) -> Self {
        Self {
            kappa: 2.0 * n as f64,
        }
    }

    /// `kappa * tr(A B)`.
    pub fn bilinear(&self, a: &CMat, b: &CMat) -> Result<Complex64> {
        check_square_pair(a, b)?;
        Ok(trace(&(a * b)) * self.kappa)
    }

    /// `kappa * tr(A B^dagger)`.
    pub fn hermitian(&self, a: &CMat, b: &CMat) -> Result<Complex64> {
        check_square_pair(a, b)?;
        Ok(trace(&(a * b.adjoint())) * self.kappa)
    }
}

fn check_square_pair(a: &CMat, b: &CMat) -> Result<()> {
    if !a.is_square() || !b.is_square() || a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}

/// Matrix of `ad(a)` acting on `gl(n)` in the standard basis, column-major in `E_ij`.
fn ad_matrix(a: &CMat) -> CMat {
    let n = a.nrows();
    let mut m = CMat::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            let img = commutator(a, &elementary(n, i, j));
            let col = i * n + j;
            for p in 0..n {
                for q in 0..n {
                    m[(p * n + q, col)] = img[(p, q)];
                }
            }
        }
    }
    m
}

/// One row of the invariant table.
#[derive(Clone, Debug)]
pub struct InvariantRow {
    pub name: String,
    pub value: f64,
    /// `true` for residuals that must vanish, `false` for exact integer checks.
    pub is_residual: bool,
    pub ok: bool,
}

/// Residuals of every structural invariant of a [`LieBasis`].
pub fn invariant_table(basis: &LieBasis, tol: f64) -> Vec<InvariantRow> {
    let n = basis.n;
    let mut rows = Vec::new();
    let mut residual = |name: &str, v: f64| {
        rows.push(InvariantRow {
            name: name.to_string(),
            value: v,
            is_residual: true,
            ok: v < tol,
        });
    };

    residual(
        "[x,e-1] + e-1",
        max_abs(&(commutator(&basis.x, &basis.em1) + &basis.em1)),
    );
    residual(
        "[x,e1] - e1",
        max_abs(&(commutator(&basis.x, &basis.e1) - &basis.e1)),
    );
    residual(
        "[e-1,e1] - x",
        max_abs(&(commutator(&basis.em1, &basis.e1) - &basis.x)),
    );
    let mut central = 0.0f64;
    let mut weight = 0.0f64;
    for (k, ek) in basis.hw.iter().enumerate() {
        central = central.max(max_abs(&commutator(&basis.e1, ek)));
        let m = basis.exponents[k] as f64;
        weight = weight.max(max_abs(&(commutator(&basis.x, ek) - ek.scale(m))));
    }
    residual("max_k |[e1,e_k]|", central);
    residual("max_k |[x,e_k] - m_k e_k|", weight);
    let mut tr = 0.0f64;
    for m in [&basis.x, &basis.e1, &basis.em1].into_iter().chain(basis.hw.iter()) {
        tr = tr.max(trace(m).norm());
    }
    residual("max |trace|", tr);
    // Exponents recovered as Rayleigh quotients of ad(x) on span{e_k}.
    let mut spec = 0.0f64;
    for (k, ek) in basis.hw.iter().enumerate() {
        let img = commutator(&basis.x, ek);
        let q = trace(&(&img * ek.adjoint())) / trace(&(ek * ek.adjoint()));
        spec = spec.max((q - Complex64::new(basis.exponents[k] as f64, 0.0)).norm());
    }
    residual("ad(x) spectrum on span{e_k} - exponents", spec);
    // ad-invariance of the trace form on a fixed triple.
    let a = &basis.e1 + &basis.x;
    let b = &basis.em1 + basis.hw.last().unwrap();
    let cc = &basis.x + &basis.em1.scale(2.0);
    let inv = trace(&(commutator(&a, &b) * &cc)) + trace(&(&b * commutator(&a, &cc)));
    residual("tr([A,B]C) + tr(B[A,C])", inv.norm());

    let mut exact = |name: &str, got: usize, want: usize| {
        rows.push(InvariantRow {
            name: format!("{name} (want {want})"),
            value: got as f64,
            is_residual: false,
            ok: got == want,
        });
    };

    // Span of the highest-weight vectors.
    let mut stack = CMat::zeros(n * n, n - 1);
    for (k, ek) in basis.hw.iter().enumerate() {
        for p in 0..n {
            for q in 0..n {
                stack[(p * n + q, k)] = ek[(p, q)];
            }
        }
    }
    exact("dim span{e_k}", rank(&stack, 1e-10), n - 1);

    // Centralizer of e1 inside strictly upper triangular matrices.
    let upper: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let mut sys = CMat::zeros(n * n, upper.len());
    for (col, (i, j)) in upper.iter().enumerate() {
        let img = commutator(&basis.e1, &elementary(n, *i, *j));
        for p in 0..n {
            for q in 0..n {
                sys[(p * n + q, col)] = img[(p, q)];
            }
        }
    }
    exact(
        "centralizer dim of e1 in n+",
        upper.len() - rank(&sys, 1e-10),
        n - 1,
    );
    // Full centralizer in gl(n) contains the identity, hence n.
    let ad = ad_matrix(&basis.e1);
    exact("centralizer dim of e1 in gl(n)", n * n - rank(&ad, 1e-10), n);

    let total: usize = basis.weight_spaces.values().map(Vec::len).sum();
    exact("sum of weight-space dims", total, n * n - 1);
    let placed = basis
        .hw
        .iter()
        .enumerate()
        .filter(|(k, ek)| weight_of(basis, ek) == Some(basis.exponents[*k]))
        .count();
    exact("e_k found in weight m_k", placed, n - 1);
    exact(
        "e-1 in weight -1",
        usize::from(weight_of(basis, &basis.em1) == Some(-1)),
        1,
    );
    rows
}

/// ad(x)-weight of a homogeneous element, `None` if it mixes weights.
pub fn weight_of(basis: &LieBasis, a: &CMat) -> Option<i32> {
    let norm = frobenius(a);
    if norm == 0.0 {
        return None;
    }
    let img = commutator(&basis.x, a);
    let q = trace(&(&img * a.adjoint())) / trace(&(a * a.adjoint()));
    let w = q.re.round();
    if frobenius(&(img - a.scale(w))) < 1e-12 * norm.max(1.0) {
        Some(w as i32)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn mat(rows: &[&[f64]]) -> CMat {
        let n = rows.len();
        CMat::from_fn(n, n, |i, j| c(rows[i][j], 0.0))
    }

    #[test]
    fn sl2_normalization() {
        let b = construct_principal_sl2(2).unwrap();
        assert_eq!(b.x, mat(&[&[0.5, 0.0], &[0.0, -0.5]]));
        assert_eq!(b.em1, mat(&[&[0.0, 0.0], &[1.0, 0.0]]));
        assert_eq!(b.e1, mat(&[&[0.0, -0.5], &[0.0, 0.0]]));
        // Hand expansion: em1*e1 = diag(0, -1/2), e1*em1 = diag(-1/2, 0).
        let em1e1 = mat(&[&[0.0, 0.0], &[0.0, -0.5]]);
        let e1em1 = mat(&[&[-0.5, 0.0], &[0.0, 0.0]]);
        assert_eq!(&b.em1 * &b.e1, em1e1);
        assert_eq!(&b.e1 * &b.em1, e1em1);
        assert_eq!(em1e1 - e1em1, b.x);
        assert_eq!(commutator(&b.x, &b.x), CMat::zeros(2, 2));
        assert_eq!(trace(&b.x), c(0.0, 0.0));
        assert_eq!(b.hw.len(), 1);
        assert_eq!(b.hw[0], b.e1);
    }

    #[test]
    fn sl3_normalization() {
        let b = construct_principal_sl2(3).unwrap();
        assert_eq!(b.x, mat(&[&[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, -1.0]]));
        assert_eq!(b.em1, mat(&[&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]));
        assert_eq!(b.e1, mat(&[&[0.0, -1.0, 0.0], &[0.0, 0.0, -1.0], &[0.0, 0.0, 0.0]]));
        assert_eq!(commutator(&b.em1, &b.e1), b.x);
        assert_eq!(b.hw[1], elementary(3, 0, 2));
    }

    #[test]
    fn weight_dims() {
        let dims = |n| {
            construct_principal_sl2(n)
                .unwrap()
                .weight_spaces
                .iter()
                .map(|(w, v)| (*w, v.len()))
                .collect::<Vec<_>>()
        };
        assert_eq!(dims(2), vec![(-1, 1), (0, 1), (1, 1)]);
        assert_eq!(dims(3), vec![(-2, 1), (-1, 2), (0, 2), (1, 2), (2, 1)]);
        let b3 = construct_principal_sl2(3).unwrap();
        assert_eq!(*b3.weight_spaces.keys().last().unwrap(), b3.max_weight());
        assert_eq!(b3.max_weight(), *b3.exponents.last().unwrap());
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(matches!(construct_principal_sl2(1), Err(Error::RankOutOfRange(1))));
        assert!(construct_principal_sl2(9).is_err());
    }

    #[test]
    fn all_invariants_hold() {
        for n in MIN_RANK..=MAX_RANK {
            let b = construct_principal_sl2(n).unwrap();
            for row in invariant_table(&b, 1e-12) {
                assert!(row.ok, "n={n}: {} = {}", row.name, row.value);
            }
        }
    }

    #[test]
    fn trace_form_values() {
        let b = construct_principal_sl2(2).unwrap();
        let tf = TraceForm::default();
        assert_eq!(tf.bilinear(&b.x, &b.x).unwrap(), c(0.5, 0.0));
        for n in 2..=8 {
            let b = construct_principal_sl2(n).unwrap();
            assert_eq!(tf.bilinear(&b.e1, &b.e1).unwrap(), c(0.0, 0.0));
        }
        let e21 = elementary(2, 1, 0);
        assert_eq!(tf.hermitian(&e21, &e21).unwrap(), c(1.0, 0.0));
        assert!(tf.bilinear(&e21, &CMat::zeros(3, 3)).is_err());
    }
}
