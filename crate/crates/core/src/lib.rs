//! Kinetic mean-field-game model of knowledge growth.
//!
//! Agents meet at random and the less knowledgeable one adopts the other's
//! level with a probability set by how much time it spends learning. The crate
//! solves the forward transport of the agent density, the backward optimal
//! learning problem, their fixed point, and the balanced-growth profiles of the
//! rescaled system.

// `!(x > 0.0)` style tests are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bgp;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod hjb;
pub mod kinetic;
pub mod mfg;
mod ode;

pub use error::{Error, Result};
pub use grid::{build_mesh, Mesh, Spacing, TimeAxis};
pub use kinetic::{DensityField, Integrator, LearningTech, StrategyField};
pub use hjb::{HjbScheme, ValueField};
pub use mfg::{solve_mfg, MfgOptions, MfgSolution};
