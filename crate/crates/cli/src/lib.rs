//! Configuration and verbs of the `pcakernel` command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod run;

pub use config::{parse_config, Config};
pub use error::CliError;
pub use run::{run, Verb};
