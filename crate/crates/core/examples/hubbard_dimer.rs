//! Two-site Hubbard model: solver output against the closed form.

use sshhub::eigen::{lowest_eigenpairs, SolverOptions};
use sshhub::operators::{assemble_h0, ChainSpec};
use sshhub::Result;

pub fn run_example() -> Result<()> {
    let (t, u) = (1.0, 4.0);
    let chain = ChainSpec::new(2, t, t, u)?;
    let sol = lowest_eigenpairs(&assemble_h0(&chain)?, &SolverOptions::with_k(4))?;
    let root = (u * u + 16.0 * t * t).sqrt();
    let mut exact = [0.5 * (u - root), 0.0, u, 0.5 * (u + root)];
    exact.sort_by(f64::total_cmp);
    for (e, x) in sol.energies.iter().zip(exact) {
        println!("{e:+.15}  exact {x:+.15}");
        assert!((e - x).abs() < 1e-12);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
