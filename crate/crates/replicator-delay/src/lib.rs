//! Delay-kernel analysis for two-strategy replicator dynamics.
//!
//! The state is the share `s(t)` of the first strategy. Its growth rate
//! responds to a delayed population average taken through a normalized
//! kernel, which turns the replicator equation into an integro-differential
//! equation. This crate covers the full pipeline for that model:
//!
//! * [`game`]: payoff matrices and the coefficient bundle of the expansion
//!   about the interior equilibrium.
//! * [`kernel`]: the supported delay kernels, their Laplace transforms, and
//!   grid discretizations used by the integrator.
//! * [`spectrum`]: characteristic roots, oscillation thresholds per kernel
//!   family, and numerical crossing checks.
//! * [`lindstedt`]: closed-form limit-cycle amplitude predictions near each
//!   threshold.
//! * [`simulate`]: a fixed-step integrator with history interpolation, cycle
//!   measurement, and parameter sweeps.
//! * [`cli`]: the command-line front end with deterministic CSV output.

pub mod cli;
pub mod game;
pub mod kernel;
pub mod lindstedt;
pub mod simulate;
pub mod spectrum;
