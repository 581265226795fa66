//! Experiment harness, dataset loading and the session service around
//! `semloop-core`.

pub mod config;
pub mod harness;
pub mod io;
pub mod service;
