//! Occupation words, combinadic ranks and the composite half-filled basis.

use sshhub::basis::{binomial, hopping_parity, CompositeIndex, FockBasis, SectorBasis};
use sshhub::Result;

pub fn run_example() -> Result<()> {
    let sector = SectorBasis::new(4, 2)?;
    println!("N=4, two particles per spin: D = {}", sector.dim());
    for (rank, &word) in sector.words().iter().enumerate() {
        assert_eq!(sector.rank(word), Some(rank));
        assert_eq!(sector.unrank(rank), word);
        println!("  rank {rank}: {word:04b}");
    }

    // a hop from site 0 to site 2 passes site 1
    println!(
        "sign of c+_2 c_0 on 0b0011: {}",
        hopping_parity(0b0011, 0, 2)
    );

    let basis = FockBasis::half_filling(4)?;
    let (up, dn) = basis.words(7);
    let idx = CompositeIndex::from_global(7, basis.dn.dim());
    println!("global 7 = (up {up:04b}, dn {dn:04b}) = {idx:?}");
    assert_eq!(basis.index_of(up, dn), Some(7));

    for n in (2..=12).step_by(2) {
        let d = binomial(n, n / 2);
        println!("N={n:2}  D={d:4}  n={}", d * d);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
