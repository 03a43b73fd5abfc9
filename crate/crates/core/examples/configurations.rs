//! Dominant occupation configurations of the ground and second excited
//! state.

use sshhub::analysis::dominant_configurations;
use sshhub::basis::FockBasis;
use sshhub::eigen::SolverOptions;
use sshhub::operators::ChainSpec;
use sshhub::pipeline::solve;
use sshhub::Result;

pub fn run_example() -> Result<()> {
    let chain = ChainSpec::topological(8, 0.1);
    let sol = solve(&chain, &SolverOptions::with_k(4))?;
    let basis = FockBasis::half_filling(8)?;
    for state in [0, 2] {
        let report = dominant_configurations(&basis, state, &sol.vectors[state], 8)?;
        print!("{}", report.to_table());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
