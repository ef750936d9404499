//! Command-line front end for the consensus simulator.

pub mod commands;
pub mod svg;
