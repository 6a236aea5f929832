//! Command-line front end for the descent engine.

pub mod args;
pub mod jobs;

pub use args::Cli;
pub use jobs::{run, Outcome};
