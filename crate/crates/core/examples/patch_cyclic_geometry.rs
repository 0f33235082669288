//! Cyclic `n = 3` field `alpha_2 = z` on a patch: immersion certificate and the
//! curvature sandwich `K <= Sec <= 0`, `|B|^2 = 2 (Sec - K)`. Writes a CSV.

use higgslab::domain::SurfaceDomain;
use higgslab::higgs::{build_hitchin_higgs, Differential};
use higgslab::lie::construct_principal_sl2;
use higgslab::linalg::c;
use higgslab::pipeline::analyze;
use higgslab::solver::{default_init, solve_harmonic_metric, SolverParams};

fn main() -> higgslab::Result<()> {
    let basis = construct_principal_sl2(3)?;
    let domain = SurfaceDomain::patch(64, 1.0)?;
    let alpha = Differential::polynomial(2, vec![c(0.0, 0.0), c(1.0, 0.0)])?;
    let phi = build_hitchin_higgs(&basis, &[alpha], &domain)?;
    let params = SolverParams { tol: 1e-10, ..SolverParams::default() };
    let (h, outcome) = solve_harmonic_metric(&phi, &default_init(&phi), &params)?;
    println!("{:?} after {} iterations on the {} path", outcome.status, outcome.iterations, outcome.path);

    let a = analyze(&phi, &h, 1.0)?;
    let g = &a.report.geometry;
    println!("min detg {:.4}, branch points {}", g.detg.min, g.branch_points.len());
    let gr = &a.geometry;
    let sandwich = gr.evaluated.iter().all(|&i| gr.k_induced.values[i] <= gr.sec_ambient.values[i] && gr.sec_ambient.values[i] <= 1e-10);
    println!("K <= Sec <= 0 at every evaluated node: {sandwich}");
    if let (Some(b), Some(at)) = (&g.b_norm_sq, g.b_norm_sq_argmax) {
        println!("|B|^2 in [{:.3e}, {:.4}], largest at z = {:.3} + {:.3}i", b.min, b.max, at.0, at.1);
    }
    let path = std::env::temp_dir().join("patch_cyclic_geometry.csv");
    gr.write_csv(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}
