//! Reproducible random problem instances for tests, benchmarks and `verify`.

use num_complex::Complex64 as C64;
use rand::Rng;

use crate::pauli::{Pauli, PauliString, PauliSum};
use crate::problem::{InitialState, OdeProblem};

const AXES: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

pub fn random_string<R: Rng + ?Sized>(rng: &mut R, n: usize) -> PauliString {
    PauliString::new((0..n).map(|_| AXES[rng.random_range(0..4)]).collect())
}

fn random_non_identity<R: Rng + ?Sized>(rng: &mut R, n: usize) -> PauliString {
    loop {
        let s = random_string(rng, n);
        if !s.is_identity() {
            return s;
        }
    }
}

/// Random complex Pauli sum with `terms` strings and coefficients in the unit box scaled by `scale`.
pub fn random_sum<R: Rng + ?Sized>(rng: &mut R, n: usize, terms: usize, scale: f64) -> PauliSum {
    let items: Vec<(C64, PauliString)> = (0..terms)
        .map(|_| {
            let c = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale;
            (c, random_string(rng, n))
        })
        .collect();
    PauliSum::from_terms(n, items).expect("consistent qubit count")
}

pub fn random_state<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..1usize << n)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = crate::dense::vec_norm(&v);
    v.into_iter().map(|z| z / norm).collect()
}

/// Dissipative instance with a 4-term real Hamiltonian, `jumps` jump operators
/// of 3 complex terms each, and a random unit initial state.
pub fn random_problem<R: Rng + ?Sized>(rng: &mut R, n: usize, jumps: usize, time: f64) -> OdeProblem {
    let h_terms: Vec<(C64, PauliString)> = (0..4)
        .map(|_| (C64::new(rng.random_range(-0.5..0.5), 0.0), random_non_identity(rng, n)))
        .collect();
    let h = PauliSum::from_terms(n, h_terms).expect("consistent qubit count");
    let ls = (0..jumps).map(|_| random_sum(rng, n, 3, 0.5)).collect();
    let psi0 = random_state(rng, n);
    OdeProblem::new(h, ls, InitialState::from_amplitudes(&psi0), time).expect("valid random instance")
}
