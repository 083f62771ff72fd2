//! Evolutionary multitasking in a `no_std` + `alloc` core.
//!
//! Several black-box maximization tasks are encoded into one random-key
//! space `[0, 1]^D` and solved jointly, with knowledge moving between tasks
//! through:
//!
//! - implicit transfer: one population, crossover across skill factors
//!   ([`transfer::run_mfea`]);
//! - adaptive mixture-model transfer: per-task Gaussian search models
//!   mixed with learned, row-stochastic coefficients
//!   ([`transfer::run_adaptive_emt`]);
//! - explicit transfer: island-style migration at a fixed interval
//!   ([`transfer::run_explicit_emt`]).
//!
//! The single-task baseline lives in [`search::run_cea`]. The [`multix`]
//! module recasts multi-fidelity, bilevel and multi-scenario problems as
//! multitask instances, and [`polecart`] provides the double-pole
//! neuroevolution benchmark.
//!
//! IO, file formats and the command-line runner live in the `emt-harness`
//! crate.

#![no_std]

// Float methods come from `num_traits::Float` (libm). When std is in the
// build graph (tests) they resolve inherently, hence the per-import allows.

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod benchmark;
pub mod engine;
pub mod error;
pub mod multix;
pub mod polecart;
pub mod problem;
pub mod rng;
pub mod search;
pub mod transfer;

pub use engine::EngineSpec;
pub use error::{Error, Result};
pub use problem::{assemble_mto, MultitaskProblem, Objective, TaskDefinition};
pub use search::{EvolverConfig, Individual, Population, RunResult, TaskTrace};
