//! At the Fuchsian point on a torus the lowering operator preserves a flag,
//! so no harmonic metric exists; on a patch the same field is totally geodesic.

use higgslab::domain::SurfaceDomain;
use higgslab::higgs::build_hitchin_higgs;
use higgslab::lie::construct_principal_sl2;
use higgslab::pipeline::analyze;
use higgslab::solver::{default_init, solve_harmonic_metric, SolverParams};

fn main() -> higgslab::Result<()> {
    let basis = construct_principal_sl2(2)?;
    let torus = SurfaceDomain::square_torus(32)?;
    let phi = build_hitchin_higgs(&basis, &[], &torus)?;
    let (_, outcome) = solve_harmonic_metric(&phi, &default_init(&phi), &SolverParams::default())?;
    println!("torus: {:?}", outcome.status);
    if let Some(o) = &outcome.obstruction {
        println!("  invariant block m = {}, partial-trace integral {:.6}", o.block, o.integral);
    }

    let patch = SurfaceDomain::patch(64, 0.5)?;
    let phi = build_hitchin_higgs(&basis, &[], &patch)?;
    let params = SolverParams { tol: 1e-11, ..SolverParams::default() };
    let (h, outcome) = solve_harmonic_metric(&phi, &default_init(&phi), &params)?;
    let a = analyze(&phi, &h, 1.0)?;
    let g = &a.report.geometry;
    println!("patch: {:?} in {} iterations", outcome.status, outcome.iterations);
    if let (Some(k), Some(s), Some(b)) = (&g.k_induced, &g.sec_ambient, &g.b_norm_sq) {
        println!("  K in [{:.10}, {:.10}], Sec in [{:.10}, {:.10}], sup |B|^2 = {:.2e}", k.min, k.max, s.min, s.max, b.max);
    }
    Ok(())
}
