//! Traveling waves for monostable lattice equations with delayed nonlocal
//! interaction: minimal wave speeds, wave profiles by monotone iteration, and
//! direct lattice simulation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bounds;
pub mod config;
pub mod dispersion;
pub mod error;
pub mod expr;
pub mod io;
pub mod kernel;
pub mod lattice_sim;
pub mod model;
pub mod numerics;
pub mod solver;
pub mod waveops;

pub use error::{Error, Result};
pub use kernel::KernelSpec;
pub use model::{check_hypotheses, Nonlinearity, ReactionModel};
