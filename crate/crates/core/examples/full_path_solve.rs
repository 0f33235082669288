//! A non-cyclic `n = 3` field (`alpha_1` and `alpha_2` both nonzero) needs the
//! full Hermitian unknown; the solved metric is genuinely non-diagonal.

use higgslab::domain::SurfaceDomain;
use higgslab::higgs::{build_hitchin_higgs, Differential};
use higgslab::lie::construct_principal_sl2;
use higgslab::linalg::c;
use higgslab::pipeline::analyze;
use higgslab::solver::{default_init, solve_harmonic_metric, SolverParams};

fn main() -> higgslab::Result<()> {
    let basis = construct_principal_sl2(3)?;
    let domain = SurfaceDomain::patch(32, 1.0)?;
    let alphas = [
        Differential::polynomial(1, vec![c(0.3, 0.0), c(0.0, 0.2)])?,
        Differential::polynomial(2, vec![c(1.0, 0.0), c(0.5, 0.0)])?,
    ];
    let phi = build_hitchin_higgs(&basis, &alphas, &domain)?;
    let params = SolverParams { tol: 1e-10, ..SolverParams::default() };
    let (h, outcome) = solve_harmonic_metric(&phi, &default_init(&phi), &params)?;
    println!(
        "{:?} on the {} path: {} iterations, {} Newton steps, residual sup {:.2e}",
        outcome.status, outcome.path, outcome.iterations, outcome.newton_steps, outcome.residual_sup
    );
    println!("largest off-diagonal entry of H: {:.4e}", h.off_diagonal_sup());
    let a = analyze(&phi, &h, 1.0)?;
    let g = &a.report.geometry;
    println!("conformal {}, min detg {:.4}, total energy {:.6}", g.conformal, g.detg.min, g.total_energy);
    Ok(())
}
