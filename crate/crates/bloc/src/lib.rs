//! File formats, threading and the command line for `bloc-core`.

pub mod benchmark;
pub mod blackbox;
pub mod cli;
pub mod config;
pub mod io;
pub mod pool;
pub mod simulate;

pub use cli::run_cli;
