//! Library surface of the tnvault command-line tool; the binary in
//! `main.rs` is a thin parser over these modules.

pub mod bench;
pub mod config;
pub mod decompose;
pub mod error;
pub mod metrics_cmd;
pub mod reconstruct;
