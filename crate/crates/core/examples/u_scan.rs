//! Spectra and dipole-allowed level positions over a grid of interaction
//! strengths, with eigen-decompositions cached on disk.

use sshhub::analysis::u_grid;
use sshhub::config::RunConfig;
use sshhub::pipeline::run_u_scan;
use sshhub::Result;

pub fn run_example() -> Result<()> {
    let dir = std::env::temp_dir().join("sshhub-examples").join("uscan");
    let cfg = RunConfig {
        sites: 6,
        k: 40,
        samples: 4096,
        directory: dir.clone(),
        ..RunConfig::default()
    };
    let scan = run_u_scan(&cfg, &u_grid(0.0, 0.2, 0.05)?)?;
    for (u, gap) in scan.lowest_allowed_gaps() {
        println!(
            "U = {u:.2}: lowest allowed gap {:.2} omega",
            gap.unwrap_or(f64::NAN)
        );
    }
    scan.write_csv(std::fs::File::create(dir.join("uscan.csv"))?)?;
    scan.write_overlay_json(std::fs::File::create(dir.join("uscan_overlay.json"))?)?;
    println!("wrote {}", dir.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
