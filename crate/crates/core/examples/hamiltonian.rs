//! Sparse field-free Hamiltonian, dipole diagonal and the two lattice
//! symmetries for a six-site chain.

use sshhub::operators::{assemble_dipole_diagonal, assemble_h0, reflection, spin_swap, ChainSpec};
use sshhub::Result;

pub fn run_example() -> Result<()> {
    let chain = ChainSpec::topological(6, 0.1);
    let h = assemble_h0(&chain)?;
    let (lo, hi) = h.gershgorin_bounds();
    println!(
        "H0: n = {}, nnz = {}, asymmetry = {:e}, spectrum in [{lo:.3}, {hi:.3}]",
        h.dim(),
        h.nnz(),
        h.asymmetry()
    );
    println!("site positions {:?}", chain.positions());
    let d = assemble_dipole_diagonal(&chain)?;
    println!(
        "dipole range [{}, {}]",
        d.iter().cloned().fold(f64::MAX, f64::min),
        d.iter().cloned().fold(f64::MIN, f64::max)
    );

    // both symmetries commute with H0
    let x: Vec<f64> = (0..h.dim())
        .map(|i| ((i * 37) % 101) as f64 / 101.0 - 0.5)
        .collect();
    for (name, sym) in [
        ("reflection", reflection(&chain)?),
        ("spin swap", spin_swap(&chain)?),
    ] {
        let (mut a, mut b, mut c) = (vec![0.0; x.len()], vec![0.0; x.len()], vec![0.0; x.len()]);
        sym.apply(&x, &mut a);
        h.matvec(&a, &mut b);
        h.matvec(&x, &mut c);
        sym.apply(&c.clone(), &mut c);
        let diff = b
            .iter()
            .zip(&c)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        println!(
            "{name}: even subspace {} / {}, |[S, H0] x| = {diff:e}",
            sym.eigenspace_dim(true),
            h.dim()
        );
        assert!(diff < 1e-12);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
