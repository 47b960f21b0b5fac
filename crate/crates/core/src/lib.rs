//! Energy-stable implicit simulation of two-phase flow with a soluble surfactant.
//!
//! The model couples an incompressible Navier–Stokes equation with variable
//! density, a Cahn–Hilliard equation for the order parameter `φ` and a transport
//! equation for the surfactant chemical potential `q`. Time stepping follows a
//! regularized implicit scheme whose discrete energy inequality is audited after
//! every step.
//!
//! The crate is organized bottom-up:
//!
//! * [`constitutive`] — model functions, defaults and the assumption audit.
//! * [`mesh`] — 2D staggered (MAC) grid with summation-by-parts operators.
//! * [`linalg`] — sparse matrices, CG, banded LU, Poisson and saddle solves.
//! * [`state`] — one time level, observables and initial scenarios.
//! * [`stepper`] — the implicit step, its nonlinear solvers and the run loop.
//! * [`energy`] — energy evaluation and the per-step dissipation ledger.
//! * [`harness`] — δ/τ continuation and grid-refinement studies.
//! * [`config`] and [`cli`] — INI configuration and the command-line front end.

pub mod cli;
pub mod config;
pub mod constitutive;
pub mod energy;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod state;
pub mod stepper;

pub use error::{ChnsError, Result};
