//! Constant Higgs fields on the torus: the identity metric is an exact solution
//! for `n = 2`, `q = 2`, and the fiducial metric for the cyclic `n = 3` case.

use higgslab::domain::SurfaceDomain;
use higgslab::higgs::{build_hitchin_higgs, Differential};
use higgslab::lie::construct_principal_sl2;
use higgslab::linalg::c;
use higgslab::pipeline::analyze;
use higgslab::solver::{default_init, solve_harmonic_metric, SolverParams};

fn main() -> higgslab::Result<()> {
    let params = SolverParams {
        tol: 1e-11,
        ..SolverParams::default()
    };
    for (n, value) in [(2usize, 2.0), (3, 1.0)] {
        let basis = construct_principal_sl2(n)?;
        let domain = SurfaceDomain::square_torus(64)?;
        let phi = build_hitchin_higgs(&basis, &[Differential::constant(n - 1, c(value, 0.0))], &domain)?;
        let (h, outcome) = solve_harmonic_metric(&phi, &default_init(&phi), &params)?;
        let a = analyze(&phi, &h, 1.0)?;
        let g = &a.report.geometry;
        println!("n = {n}, alpha_{} = {value}", n - 1);
        println!("  status {:?}, residual sup {:.2e}", outcome.status, outcome.residual_sup);
        println!("  |H - I| = {:.3e}", h.deviation_from_identity());
        println!("  detg in [{:.6e}, {:.6e}], conformal {}", g.detg.min, g.detg.max, g.conformal);
        match (&a.report.entropy, &a.report.entropy_error) {
            (Some(e), _) => println!("  entropy bound {:.3e}, Gauss-Bonnet defect {:.3e}", e.bound, e.gauss_bonnet_defect.unwrap_or(0.0)),
            (None, Some(msg)) => println!("  entropy bound unavailable: {msg}"),
            _ => {}
        }
    }
    Ok(())
}
