//! File formats, parallel pipeline stages and reports around
//! `gravgrasp-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataset;
pub mod error;
pub mod fsutil;
pub mod manifest;
pub mod mesh_io;
pub mod pipeline;
pub mod report;

pub use config::PipelineConfig;
pub use error::{Error, Result};
