//! Command-line front end for `frac-eig`: configuration parsing, the
//! `solve`, `verify`, `sweep` and `oracle` commands, and file output.

// `!(x > 0.0)` is the NaN-rejecting form of these checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{Fault, SuiteSettings, VerifyOutcome};
pub use config::{ConfigError, RunConfig};
