//! Randomized invariants of the Hamiltonian, its symmetries and the spectra.

use proptest::prelude::*;

use sshhub::dynamics::{propagate_interaction_picture, PropagationOptions, PulseSpec};
use sshhub::eigen::SolverOptions;
use sshhub::operators::{assemble_dipole_diagonal, assemble_h0, reflection, spin_swap, ChainSpec};
use sshhub::pipeline::{solve, transitions};
use sshhub::spectrum::harmonic_spectrum;

fn chain() -> impl Strategy<Value = ChainSpec> {
    (
        prop::sample::select(vec![2usize, 4, 6]),
        0.01f64..1.0,
        0.01f64..1.0,
        0.0f64..2.0,
    )
        .prop_map(|(n, v, w, u)| ChainSpec::new(n, v, w, u).unwrap())
}

fn vector(dim: usize, seed: u64) -> Vec<f64> {
    (0..dim)
        .map(|i| ((i as u64 * 2654435761 + seed * 40503) % 1000) as f64 / 500.0 - 1.0)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hamiltonian_is_symmetric_and_commutes_with_symmetries(c in chain(), seed in 0u64..1000) {
        let h = assemble_h0(&c).unwrap();
        prop_assert!(h.asymmetry() < 1e-14);
        let x = vector(h.dim(), seed);
        for s in [reflection(&c).unwrap(), spin_swap(&c).unwrap()] {
            prop_assert!(s.is_involution());
            let (mut hx, mut shx, mut sx, mut hsx) =
                (vec![0.0; h.dim()], vec![0.0; h.dim()], vec![0.0; h.dim()], vec![0.0; h.dim()]);
            h.matvec(&x, &mut hx);
            s.apply(&hx, &mut shx);
            s.apply(&x, &mut sx);
            h.matvec(&sx, &mut hsx);
            let worst = shx.iter().zip(&hsx).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(worst < 1e-12, "commutator {}", worst);
        }
    }

    #[test]
    fn reflection_flips_the_dipole(c in chain()) {
        let d = assemble_dipole_diagonal(&c).unwrap();
        let p = reflection(&c).unwrap();
        for (r, &dr) in d.iter().enumerate() {
            let (image, _) = p.image(r);
            prop_assert!((d[image] + dr).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenstates_have_vanishing_diagonal_dipole(u in 0.0f64..1.0, topological in any::<bool>()) {
        let c = if topological { ChainSpec::topological(4, u) } else { ChainSpec::trivial(4, u) };
        let sol = solve(&c, &SolverOptions::with_k(36)).unwrap();
        let tm = transitions(&c, &sol).unwrap();
        for j in 0..tm.len() {
            prop_assert!(tm.elements[(j, j)].abs() < 1e-10);
        }
    }

    #[test]
    fn weak_fields_conserve_the_norm(u in 0.0f64..0.5, e0 in 0.0f64..0.01) {
        let c = ChainSpec::topological(4, u);
        let sol = solve(&c, &SolverOptions::with_k(36)).unwrap();
        let tm = transitions(&c, &sol).unwrap();
        let pulse = PulseSpec::new(0.005, e0, 5).unwrap();
        let opts = PropagationOptions { samples: 256, ..PropagationOptions::default() };
        let traj = propagate_interaction_picture(&tm, &pulse, &opts).unwrap();
        prop_assert!(traj.max_norm_drift <= 1e-8);
        prop_assert_eq!(traj.position.len(), 256);
    }

    #[test]
    fn yield_scales_quadratically(scale in 0.1f64..10.0, len in 8usize..200) {
        let pulse = PulseSpec::default();
        let a: Vec<f64> = (0..len).map(|i| ((i * 37) % 17) as f64 - 8.0).collect();
        let b: Vec<f64> = a.iter().map(|x| scale * x).collect();
        let (sa, sb) = (harmonic_spectrum(&a, &pulse).unwrap(), harmonic_spectrum(&b, &pulse).unwrap());
        prop_assert_eq!(sa.len(), len / 2 + 1);
        for (x, y) in sa.yield_.iter().zip(&sb.yield_) {
            prop_assert!((scale * scale * x - y).abs() <= 1e-9 * y.abs().max(1e-6));
        }
    }
}
