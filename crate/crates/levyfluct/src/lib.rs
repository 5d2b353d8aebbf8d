//! Fluctuation theory of Lévy processes on a computer.
//!
//! The crate evaluates the six fluctuation functions `A, Ā, B, C, B̄, C̄`
//! from closed forms (stable and spectrally negative models) and by marching
//! the coupled Volterra system on a grid from renewal data, then checks them
//! against path simulation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensemble;
pub mod error;
pub mod levy_model;
pub mod numerics;

pub use error::{FluctError, Result};
pub mod cli_io;
pub mod exit_toolkit;
pub mod extrema_chain;
pub mod fluct_solver;
pub mod monte_carlo;
pub mod scale_forms;
pub mod stable_forms;
pub mod values;

pub use values::FluctValues;
