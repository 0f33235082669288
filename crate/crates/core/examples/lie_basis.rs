//! Principal sl(2) triples for every supported rank, with their invariant checks.

use higgslab::lie::{construct_principal_sl2, invariant_table, MAX_RANK, MIN_RANK};

fn main() -> higgslab::Result<()> {
    for n in MIN_RANK..=MAX_RANK {
        let basis = construct_principal_sl2(n)?;
        let rows = invariant_table(&basis, 1e-12);
        let worst = rows
            .iter()
            .filter(|r| r.is_residual)
            .map(|r| r.value)
            .fold(0.0, f64::max);
        let failed = rows.iter().filter(|r| !r.ok).count();
        println!(
            "n = {n}: exponents {:?}, {} checks, largest residual {worst:.2e}, {failed} failed",
            basis.exponents,
            rows.len()
        );
    }
    let b3 = construct_principal_sl2(3)?;
    println!("\nn = 3 triple:\nx = {}e_1 = {}e_-1 = {}", b3.x.map(|z| z.re), b3.e1.map(|z| z.re), b3.em1.map(|z| z.re));
    Ok(())
}
