//! Experiment harness for the covariant lattice field theory library.

pub mod config;
pub mod data;
pub mod experiments;
pub mod report;
pub mod suite;
