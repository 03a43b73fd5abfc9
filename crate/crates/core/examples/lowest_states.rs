//! Lowest eigenstates of an eight-site chain, labelled by reflection parity,
//! spin-swap character, spin and pseudospin.

use sshhub::analysis::SpinLabels;
use sshhub::basis::FockBasis;
use sshhub::eigen::SolverOptions;
use sshhub::operators::ChainSpec;
use sshhub::pipeline::solve;
use sshhub::Result;

pub fn run_example() -> Result<()> {
    let chain = ChainSpec::topological(8, 0.1);
    let sol = solve(&chain, &SolverOptions::with_k(12))?;
    let basis = FockBasis::half_filling(8)?;
    println!(" j  energy           P  X   S  eta  residual");
    for j in 0..sol.len() {
        let l = SpinLabels::of(&basis, &sol.vectors[j])?;
        let c = &sol.characters[j];
        println!(
            "{j:2}  {:+.12}  {:+} {:+}  {:.0}  {:.0}    {:.1e}",
            sol.energies[j], c[0], c[1], l.spin, l.pseudospin, sol.residuals[j]
        );
    }
    for cluster in sol.degenerate_clusters() {
        println!("degenerate cluster {cluster:?}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
