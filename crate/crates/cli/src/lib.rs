//! Configuration parsing and experiment drivers behind the `chernflow` binary.

pub mod commands;
pub mod config;
pub mod plot;
