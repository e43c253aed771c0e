//! Measurement discipline, trace decomposition, and regression analysis
//! primitives for the `benchwatch` harness.
//!
//! This crate is the algorithmic layer: everything here is pure computation
//! over value types, safe to drive from any IO front end. The companion
//! `benchwatch` crate adds subprocess orchestration, file formats, the CLI,
//! and the CI entry points.
//!
//! The crate is `no_std` (with `alloc`): measurement reduction, interval
//! algebra, comparison analytics, regression detection, and bisection all
//! run without an operating system in the loop.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analytics;
pub mod bisect;
pub mod measure;
pub mod regression;
mod rng;
pub mod sim;
pub mod synth;
pub mod trace;
pub mod workload;

pub use rng::SplitMix64;
