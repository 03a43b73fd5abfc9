//! Few-level model: the spectrum from the ground state and its strongest
//! dipole partners against the spectrum from all computed states.

use sshhub::analysis::{allowed_transitions, reduce_levels, DEFAULT_THRESHOLD};
use sshhub::config::RunConfig;
use sshhub::pipeline::{run_spectrum, solve, transitions};
use sshhub::Result;

pub fn run_example() -> Result<()> {
    let cfg = RunConfig {
        sites: 8,
        k: 60,
        ..RunConfig::default()
    };
    let chain = cfg.chain()?;
    let sol = solve(&chain, &cfg.solver())?;
    let tm = transitions(&chain, &sol)?;
    let scheme = allowed_transitions(&sol, &tm, cfg.omega, DEFAULT_THRESHOLD)?;

    // ground state plus every state reachable from it in one or two steps
    let mut keep = vec![0];
    for p in scheme.pairs.iter().filter(|p| p.i == 0) {
        keep.push(p.j);
    }
    let first: Vec<usize> = keep.clone();
    for p in &scheme.pairs {
        if first.contains(&p.i) && !keep.contains(&p.j) && p.j < 20 {
            keep.push(p.j);
        }
    }
    keep.sort_unstable();
    println!("kept states {keep:?}");

    let full = run_spectrum(&cfg, &tm)?.spectrum;
    let reduced = run_spectrum(&cfg, &reduce_levels(&tm, &keep)?)?.spectrum;
    for order in [1.0, 3.0, 5.0, 9.0, 15.0, 25.0] {
        println!(
            "order {order:4}: log10 Y full {:7.2}  reduced {:7.2}",
            full.log10_at(order),
            reduced.log10_at(order)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
