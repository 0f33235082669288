//! Entropy lower bound on the bundled synthetic genus-2 metrics.
//! `--write <dir>` regenerates the bundled files.

use std::path::PathBuf;

use higgslab::entropy::{load_synthetic_metric, samples, write_synthetic_metric};

fn main() -> higgslab::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    if let Some(i) = args.iter().position(|a| a == "--write") {
        let dir = PathBuf::from(args.get(i + 1).map_or("data/synthetic", String::as_str));
        for m in samples::all() {
            println!("wrote {}", write_synthetic_metric(&dir, &m)?.display());
        }
        return Ok(());
    }
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/synthetic");
    for name in ["hyperbolic_genus2", "piecewise_genus2"] {
        let m = load_synthetic_metric(&dir.join(format!("{name}.json")))?;
        let rep = m.report()?;
        println!(
            "{name}: volume {:.6}, bound {:.12}, chi {}, Gauss-Bonnet defect {:.2e}",
            rep.volume,
            rep.bound,
            m.chi,
            rep.gauss_bonnet_defect.unwrap_or(f64::NAN)
        );
        let scaled = m.rescaled(3.0).report()?;
        println!("  metric scaled by 9: bound {:.12} (= bound / 3)", scaled.bound);
    }
    Ok(())
}
