//! Numerical laboratory for the small-viscosity limit of Hamilton-Jacobi
//! equations with homogeneous Neumann boundary conditions on convex boxes.
//!
//! The crate solves the terminal-value problem
//! `-du/dt - eps*Lap(u) + H(Du) = f` with `dnu(u) = 0`, the inviscid limit
//! `eps = 0`, and the adjoint Fokker-Planck problem driven by `-DpH(Du)`.
//! On top of the solvers it measures convergence rates in `eps`, assembles
//! Lipschitz / second-order certificates, and checks them against closed-form
//! bounds.
//!
//! Per-epsilon solves are data parallel; the default `parallel` feature runs
//! them on rayon, and disabling it falls back to sequential execution.

pub mod catalog;
pub mod config;
pub mod error;
pub mod estimates;
pub mod exec;
pub mod fp;
pub mod grid;
pub mod hamiltonian;
pub mod linalg;
pub mod ops;
pub mod rate;
pub mod report;
pub mod solver;

pub use error::{Error, Result};
