//! Core of the hybrid-tuning language-model toolkit.
//!
//! Everything in this crate is a pure function of its inputs and only needs an
//! allocator: dense kernels and the Adam optimizer ([`numerics`]), an
//! ALiBi decoder-only transformer with hand-written backward pass ([`model`]),
//! byte tokenization, four-stream corpus mixing and packing ([`corpus`]),
//! Self-Instruct / Self-QA instruction synthesis against an abstract completion
//! service ([`datagen`]), the token-budget trainer and forgetting experiment
//! ([`train`]) and the analytical parallelism planner ([`planner`]).
//!
//! File formats, the network client and the command line live in the `hybridlm`
//! companion crate.
#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod corpus;
pub mod datagen;
pub mod model;
pub mod numerics;
pub mod planner;
pub mod rng;
pub mod train;

pub use corpus::{Document, Domain, InstructionRecord, LossPolicy, PackedBatch, Stream};
pub use model::{ModelConfig, ModelParams, TokenSequence};
pub use numerics::{OptimizerState, Schedule, Tensor};
