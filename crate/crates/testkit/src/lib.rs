//! Test support for the nmc crates: random well-formed traces and
//! brute-force reference implementations to check the fast paths against.

pub mod fuzz;
pub mod oracle;

pub use fuzz::{fuzz_addresses, fuzz_trace, generator_suite, FuzzConfig};
