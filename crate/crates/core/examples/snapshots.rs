//! Binary `.fld` snapshots: round trip, then a truncated file is rejected with
//! the number of missing bytes.

use higgslab::domain::{snapshot, SurfaceDomain};
use higgslab::higgs::{build_hitchin_higgs, Differential};
use higgslab::lie::construct_principal_sl2;
use higgslab::linalg::c;

fn main() -> higgslab::Result<()> {
    let basis = construct_principal_sl2(3)?;
    let domain = SurfaceDomain::square_torus(16)?;
    let phi = build_hitchin_higgs(&basis, &[Differential::constant(2, c(1.0, 0.5))], &domain)?;
    let dir = std::env::temp_dir().join("higgslab_snapshots");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("phi.fld");
    snapshot::write_matrix(&path, &phi.phi, Some("phi"))?;
    let back = snapshot::read(&path)?;
    println!("header: {}", serde_json::to_string(&back.header)?);
    println!("round trip exact: {}", back.into_matrix()? == phi.phi);

    let bytes = std::fs::read(&path)?;
    std::fs::write(&path, &bytes[..bytes.len() - 100])?;
    match snapshot::read(&path) {
        Err(e) => println!("truncated file: {e}"),
        Ok(_) => println!("truncated file was accepted"),
    }
    Ok(())
}
