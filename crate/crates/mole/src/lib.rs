//! File, network and command-line plumbing around `mole_core`.

pub mod commands;
pub mod ingest;
pub mod net;
