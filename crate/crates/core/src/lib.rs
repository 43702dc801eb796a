//! Lattice Fisher-KPP equations in time and space heterogeneous media.
//!
//! The crate integrates
//!
//! ```text
//! u_j' = d(t,j+1)(u_{j+1} - u_j) + d(t,j-1)(u_{j-1} - u_j) + u_j f(t,j,u_j)
//! ```
//!
//! on truncated windows, computes principal Floquet exponents of the tilted
//! linearization at zero, and builds traveling waves by monotone iteration
//! between explicit sub- and super-solutions. Periodic media are handled in
//! [`waves_periodic`], time-only media in [`waves_timehet`].

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod coeffs;
pub mod config;
pub mod error;
pub mod floquet;
pub mod lattice;
pub mod metrics;
pub mod numerics;
pub mod output;
pub mod par;
pub mod waves_periodic;
pub mod waves_timehet;

pub use coeffs::{CoefficientField, FamilyKind, FamilyParams, Structure};
pub use error::{Error, Result};
pub use floquet::{FloquetResult, FloquetSolver, SpeedResult};
pub use lattice::{Boundary, EntireSolution, LatticeState, SimOptions};
