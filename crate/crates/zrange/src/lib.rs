//! Pipeline orchestration, file formats and experiment drivers on top of
//! `zrange-core`.
//!
//! Every run is driven by a [`config::RunConfig`]; its SHA-256 prefix names
//! the run directory and is stamped into each artifact.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod io;
pub mod pipeline;
pub mod run;
pub mod sweep;
