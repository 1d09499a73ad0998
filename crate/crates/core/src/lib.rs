//! Trace-driven timing models of in-order and out-of-order cores attached to
//! a three-level cache hierarchy, with every component in its own clock domain.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the sweep
//! harness and the command-line tool live in the `cryosim` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod bpred;
pub mod config;
pub mod cores;
pub mod kernel;
pub mod memsys;
pub mod sim;
pub mod trace;
