//! Command-line front end: file I/O and subcommands for `qinst`.
//!
//! Exit codes: 0 success, 1 unreadable or malformed input, 2 invariant
//! violation, 3 property-suite failure.

pub mod commands;
pub mod format;

pub use commands::{run, Outcome};
