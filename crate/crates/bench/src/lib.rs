//! Benchmark harness: seeded instances, reference optima, solver runs,
//! trace tables and convergence plots.
//!
//! The `rpqn-bench` binary exposes the same operations as the verbs
//! `generate`, `psistar`, `run` and `compare`.

pub mod compare;
mod error;
pub mod instance;
pub mod plot;
pub mod psistar;
pub mod runner;
pub mod spec;

pub use error::{BenchError, Result};
pub use instance::Instance;
pub use spec::{RunSpec, Scale, SolverKind};
