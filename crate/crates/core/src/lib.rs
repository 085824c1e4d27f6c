//! CZ gate design for a two-dot spin qubit: exact Hubbard simulation, a
//! pulse-level control environment and deep RL agents that learn pulses.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod env;
pub mod harness;
pub mod nn;
pub mod sim;
