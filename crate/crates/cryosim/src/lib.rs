//! Command-line front end for the cryosim simulator: trace and stats file
//! formats, configuration files, the preset sweep and report emission.

pub mod configfile;
pub mod error;
pub mod report;
pub mod statsfile;
pub mod sweep;
pub mod tracefile;
