//! Dipole-allowed transitions among the lowest states and their agreement
//! with the symmetry selection rule.

use sshhub::analysis::{allowed_transitions, check_selection_rules, SpinLabels, DEFAULT_THRESHOLD};
use sshhub::basis::FockBasis;
use sshhub::eigen::SolverOptions;
use sshhub::operators::ChainSpec;
use sshhub::pipeline::{solve, transitions};
use sshhub::Result;

pub fn run_example() -> Result<()> {
    let chain = ChainSpec::trivial(8, 0.1);
    let omega = 0.0049;
    let sol = solve(&chain, &SolverOptions::with_k(40))?;
    let tm = transitions(&chain, &sol)?;
    let scheme = allowed_transitions(&sol, &tm, omega, DEFAULT_THRESHOLD)?;
    println!("allowed pairs among the lowest 10 states:");
    for p in scheme.restrict(&(0..10).collect::<Vec<_>>()).pairs {
        println!(
            "  ({}, {})  |T| = {:.4}  gap = {:.1} omega",
            p.i, p.j, p.magnitude, p.gap
        );
    }
    println!(
        "lowest allowed gap from the ground state: {:.1} omega",
        scheme.lowest_allowed_gap().unwrap_or(f64::NAN)
    );

    let basis = FockBasis::half_filling(8)?;
    let labels = sol
        .vectors
        .iter()
        .map(|v| SpinLabels::of(&basis, v))
        .collect::<Result<Vec<_>>>()?;
    let check = check_selection_rules(&sol, &scheme, &labels, 40)?;
    println!(
        "{} pairs checked, {} disagreements",
        check.pairs_checked,
        check.violations.len()
    );
    assert!(check.violations.is_empty());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
