//! Benchmark harness, trace analytics, and CI regression sentinel.
//!
//! The measurement discipline and analysis algorithms live in
//! `benchwatch-core`; this crate supplies everything that touches the
//! world: the subprocess workload protocol, the registry and file formats,
//! the baseline store, report renderers, the webhook client, and the CLI.

pub mod ci;
pub mod config;
pub mod error;
pub mod providers;
pub mod proto;
pub mod registry;
pub mod report;
pub mod results;
pub mod runner;
pub mod store;
pub mod synthexec;
pub mod testing;
pub mod trace_io;
pub mod webhook;

pub use error::HarnessError;
