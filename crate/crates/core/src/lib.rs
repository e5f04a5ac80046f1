//! Quantum simulation of dissipative linear ODEs `d psi/dt = A psi` with
//! `A = -iH - sum_j L_j^dagger L_j`, by Hamiltonian dilation and
//! post-selection on one ancilla qubit.
//!
//! The guide in `book/` walks through each module; its snippets run as
//! doctests of this crate.

// `!(x >= 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dense;
pub mod engine;
pub mod error;
pub mod hatano_nelson;
pub mod instances;
pub mod oracle;
pub mod pauli;
pub mod problem;
pub mod solver;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/pauli.md")]
    mod pauli {}
    #[doc = include_str!("../../../book/src/problem.md")]
    mod problem {}
    #[doc = include_str!("../../../book/src/algorithm.md")]
    mod algorithm {}
    #[doc = include_str!("../../../book/src/error-bounds.md")]
    mod error_bounds {}
    #[doc = include_str!("../../../book/src/trajectories.md")]
    mod trajectories {}
    #[doc = include_str!("../../../book/src/hatano-nelson.md")]
    mod hatano_nelson {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
