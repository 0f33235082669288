use num_complex::Complex64;
use proptest::prelude::*;

use higgslab::domain::{RealField, SurfaceDomain};
use higgslab::entropy::{manning_bound, SyntheticMetric};
use higgslab::higgs::{build_hitchin_higgs, circle_action_normal_form, hopf_differential, Differential};
use higgslab::lie::{construct_principal_sl2, TraceForm};
use higgslab::linalg::{frobenius, CMat};
use higgslab::solver::project_hermitian_traceless;

fn cmat(n: usize, entries: &[(f64, f64)]) -> CMat {
    CMat::from_fn(n, n, |i, j| {
        let (re, im) = entries[i * n + j];
        Complex64::new(re, im)
    })
}

fn entries(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n * n)
}

fn coeff() -> impl Strategy<Value = Complex64> {
    (-1.5..1.5f64, -1.5..1.5f64).prop_map(|(a, b)| Complex64::new(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn trace_form_is_ad_invariant(n in 2usize..6, seed in entries(5 * 5 * 3)) {
        let a = cmat(n, &seed[..n * n]);
        let b = cmat(n, &seed[25..25 + n * n]);
        let c = cmat(n, &seed[50..50 + n * n]);
        let form = TraceForm::new(1.7);
        let lhs = form.bilinear(&(&a * &b - &b * &a), &c).unwrap();
        let rhs = form.bilinear(&a, &(&b * &c - &c * &b)).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-12);
        let sym = form.bilinear(&a, &b).unwrap() - form.bilinear(&b, &a).unwrap();
        prop_assert!(sym.norm() < 1e-12);
    }

    #[test]
    fn hitchin_section_is_in_normal_form(c1 in coeff(), c2 in coeff(), c3 in coeff()) {
        let basis = construct_principal_sl2(4).unwrap();
        let domain = SurfaceDomain::patch(16, 1.0).unwrap();
        let alphas = vec![
            Differential::constant(1, c1),
            Differential::constant(2, c2),
            Differential::polynomial(3, vec![c3, c1]).unwrap(),
        ];
        let phi = build_hitchin_higgs(&basis, &alphas, &domain).unwrap();
        prop_assert_eq!(phi.normal_form_defect().unwrap(), 0.0);
    }

    #[test]
    fn hopf_rotates_under_circle_action(c1 in coeff(), c2 in coeff(), theta in 0.0..std::f64::consts::TAU) {
        let basis = construct_principal_sl2(3).unwrap();
        let domain = SurfaceDomain::square_torus(16).unwrap();
        let alphas = vec![Differential::constant(1, c1), Differential::constant(2, c2)];
        let phi = build_hitchin_higgs(&basis, &alphas, &domain).unwrap();
        let rotated = circle_action_normal_form(&phi, theta).unwrap();
        let phase = Complex64::from_polar(1.0, 2.0 * theta);
        let q0 = hopf_differential(&phi);
        let q1 = hopf_differential(&rotated);
        for (a, b) in q0.values.iter().zip(&q1.values) {
            prop_assert!((a * phase - b).norm() < 1e-12 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn hermitian_traceless_projection_is_idempotent(n in 2usize..6, seed in entries(25)) {
        let m = cmat(n, &seed[..n * n]);
        let p = project_hermitian_traceless(&m);
        prop_assert!(frobenius(&(&p - p.adjoint())) < 1e-15);
        prop_assert!(p.trace().norm() < 1e-14);
        prop_assert!(frobenius(&(project_hermitian_traceless(&p) - &p)) < 1e-15);
    }

    #[test]
    fn constant_curvature_bound(c in 0.01..10.0f64, area in 0.1..50.0f64) {
        let d = SurfaceDomain::square_torus(16).unwrap();
        let k = RealField::constant(d, -c);
        let dv = RealField::constant(d, area / d.area());
        let rep = manning_bound(&k, &dv).unwrap();
        prop_assert!((rep.bound - c.sqrt()).abs() < 1e-12 * c.sqrt());
    }

    #[test]
    fn bound_is_nonnegative_and_scales(vals in prop::collection::vec(-5.0..0.0f64, 256), lambda in 0.1..10.0f64) {
        let d = SurfaceDomain::square_torus(16).unwrap();
        let m = SyntheticMetric {
            name: "random".into(),
            k: RealField::new(d, vals).unwrap(),
            dv: RealField::constant(d, 1.0),
            chi: -2,
        };
        let rep = m.report().unwrap();
        prop_assert!(rep.bound >= 0.0);
        let scaled = m.rescaled(lambda).report().unwrap();
        prop_assert!((scaled.bound * lambda - rep.bound).abs() <= 1e-12 * rep.bound.max(1e-300));
        prop_assert!((scaled.volume - lambda * lambda * rep.volume).abs() < 1e-12 * scaled.volume);
    }
}
