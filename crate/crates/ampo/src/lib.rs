//! Std companion to `ampo-core`: model backends, file formats, run
//! directories and the `ampo` command line.

pub mod cli;
pub mod compare;
pub mod dataset;
pub mod error;
pub mod events;
pub mod gateway;
pub mod rundir;
pub mod task;
pub mod templates;

pub use error::{Error, Result};
