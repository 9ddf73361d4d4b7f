//! Command-line harness for the XR streaming simulator: experiment
//! configuration, scenario runs, training, baseline comparison and the
//! CSV/summary files they produce.

pub mod calc;
pub mod cli;
pub mod config;
pub mod report;
pub mod run;
