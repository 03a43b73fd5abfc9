//! Every example must run to completion; each one asserts its own claims.

#[path = "../examples/checkpoint.rs"]
mod checkpoint;
#[path = "../examples/configurations.rs"]
mod configurations;
#[path = "../examples/fock_basis.rs"]
mod fock_basis;
#[path = "../examples/hamiltonian.rs"]
mod hamiltonian;
#[path = "../examples/harmonic_spectrum.rs"]
mod harmonic_spectrum;
#[path = "../examples/hubbard_dimer.rs"]
mod hubbard_dimer;
#[path = "../examples/lowest_states.rs"]
mod lowest_states;
#[path = "../examples/propagation.rs"]
mod propagation;
#[path = "../examples/reduced_model.rs"]
mod reduced_model;
#[path = "../examples/selection_rules.rs"]
mod selection_rules;
#[path = "../examples/u_scan.rs"]
mod u_scan;

#[test]
fn checkpoint_example() {
    checkpoint::run_example().unwrap();
}

#[test]
fn configurations_example() {
    configurations::run_example().unwrap();
}

#[test]
fn fock_basis_example() {
    fock_basis::run_example().unwrap();
}

#[test]
fn hamiltonian_example() {
    hamiltonian::run_example().unwrap();
}

#[test]
fn harmonic_spectrum_example() {
    harmonic_spectrum::run_example().unwrap();
}

#[test]
fn hubbard_dimer_example() {
    hubbard_dimer::run_example().unwrap();
}

#[test]
fn lowest_states_example() {
    lowest_states::run_example().unwrap();
}

#[test]
fn propagation_example() {
    propagation::run_example().unwrap();
}

#[test]
fn reduced_model_example() {
    reduced_model::run_example().unwrap();
}

#[test]
fn selection_rules_example() {
    selection_rules::run_example().unwrap();
}

#[test]
fn u_scan_example() {
    u_scan::run_example().unwrap();
}
