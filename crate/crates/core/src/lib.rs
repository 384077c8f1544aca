//! Modelling data flow through hierarchical recurrent networks.
//!
//! The pipeline this crate implements:
//!
//! 1. [`hrn`] — build and audit the network: a directed spine with one glued
//!    directed cycle (*subprogram*) per spine segment.
//! 2. [`dataflow`] — push a dimension flow around each subprogram, read off
//!    the output dimension, and compare it against the desired output to get
//!    a per-subprogram deficit/surplus margin profile.
//! 3. [`cosheaf`] — read the margin profile through two precosheaves on a
//!    descending cover of the subprogram axis; mapping-cone kernels of the
//!    canonical projections locate deficits (errors) and surpluses (fixes)
//!    degree by degree.
//! 4. [`persistence`] — pair error degrees with later fix degrees into an
//!    error persistence diagram; unfixable errors persist to infinity.
//!    Diagrams are compared with the bottleneck distance.
//! 5. [`scenario`] — tie everything together: declarative scenario files,
//!    seeded stochastic instances, reports, and diagram comparison.
//!
//! The [`selfcheck`] module carries independent reference implementations
//! (brute-force oracles) of the load-bearing algorithms plus an embedded
//! invariant suite, used by the CLI's `check` command and by the test suite.

#![forbid(unsafe_code)]

pub mod cosheaf;
pub mod dataflow;
pub mod hrn;
pub mod persistence;
pub mod scenario;
pub mod selfcheck;
