//! The circle action `phi -> e^{i theta} phi` fixes the harmonic metric, the
//! energy and `det g`, and rotates the Hopf differential by `e^{2 i theta}`.

use std::f64::consts::PI;

use higgslab::domain::SurfaceDomain;
use higgslab::higgs::{build_hitchin_higgs, circle_action, Differential};
use higgslab::lie::construct_principal_sl2;
use higgslab::linalg::c;
use higgslab::pipeline::analyze;
use higgslab::solver::{default_init, solve_harmonic_metric, SolverParams};

fn main() -> higgslab::Result<()> {
    let basis = construct_principal_sl2(2)?;
    let domain = SurfaceDomain::patch(32, 1.0)?;
    let q = Differential::polynomial(1, vec![c(1.0, 0.0), c(0.5, 0.0)])?;
    let phi = build_hitchin_higgs(&basis, &[q], &domain)?;
    let params = SolverParams { tol: 1e-11, ..SolverParams::default() };
    let (h, _) = solve_harmonic_metric(&phi, &default_init(&phi), &params)?;

    let theta = PI / 3.0;
    let rotated = circle_action(&phi, theta);
    let before = analyze(&phi, &h, 1.0)?;
    let after = analyze(&rotated, &h, 1.0)?;
    println!("residual sup: {:.3e} -> {:.3e}", before.report.residual.sup, after.report.residual.sup);
    println!("total energy: {:.15} -> {:.15}", before.geometry.total_energy, after.geometry.total_energy);
    let detg = before
        .geometry
        .detg
        .values
        .iter()
        .zip(&after.geometry.detg.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("max |detg change| {detg:.3e}");
    let phase = c(0.0, 2.0 * theta).exp();
    let hopf = before
        .geometry
        .hopf
        .values
        .iter()
        .zip(&after.geometry.hopf.values)
        .map(|(a, b)| (a * phase - b).norm())
        .fold(0.0, f64::max);
    println!("max |e^(2 i theta) hopf - hopf'| {hopf:.3e}");
    Ok(())
}
