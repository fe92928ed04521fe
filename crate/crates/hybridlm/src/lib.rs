//! Host-side companion of `hybridlm-core`: JSON-lines corpus and record
//! formats, TOML run configuration, binary checkpoints, run manifests, the
//! HTTP completion client and the `hybridlm` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod cli;
pub mod client;
pub mod config;
pub mod error;
pub mod jsonl;
pub mod manifest;
pub mod report;

pub use error::{Error, Result};
