//! File formats, corpus handling and the staged command-line pipeline
//! around `blindseg-core`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod corpus;
pub mod error;
pub mod formats;
pub mod phn;
pub mod pipeline;
pub mod wav;

pub use config::PipelineConfig;
pub use error::{CliError, Result};
