//! Instruction-data synthesis: Self-Instruct expansion from seed instructions
//! and Self-QA over unstructured documents or structured records, all driven
//! through the abstract [`CompletionClient`].

mod client;
mod dedup;
mod mock;
mod parse;
mod self_instruct;
mod self_qa;
pub mod templates;

pub use client::{
    call_with_retries, ClientError, ClientSettings, CompletionClient, CompletionRequest,
};
pub use dedup::{dedup_filter, jaccard, normalize, trigrams, DedupIndex, DEFAULT_DEDUP_THRESHOLD};
pub use mock::MockClient;
pub use parse::{parse_pairs, parse_units, ParsedPairs};
pub use self_instruct::{self_instruct_expand, SelfInstructConfig};
pub use self_qa::{
    self_qa_structured, self_qa_unstructured, FieldValue, SelfQaConfig, StructuredRecord,
};

use alloc::{string::String, vec::Vec};

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusError, InstructionRecord};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatagenError {
    #[error("at least one seed instruction is required")]
    NoSeeds,
    #[error("structured record {0:?} has no fields")]
    EmptyFieldMap(String),
    #[error("document {0:?} is not pretraining text")]
    NotPretrainText(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

pub type Result<T> = core::result::Result<T, DatagenError>;

/// Counters of one generation run. Always satisfies
/// `generated == emitted + dropped_parse + dropped_dedup`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GenerationStats {
    /// Logical requests issued (each may be retried).
    pub requests: usize,
    /// Client calls including retries.
    pub client_calls: usize,
    /// Q/A units considered, well-formed or not.
    pub generated: usize,
    pub dropped_parse: usize,
    pub dropped_dedup: usize,
    pub emitted: usize,
    /// Units returned past the requested count; never considered.
    pub surplus: usize,
}

impl GenerationStats {
    pub fn reconciles(&self) -> bool {
        self.generated == self.emitted + self.dropped_parse + self.dropped_dedup
    }

    pub fn merge(&mut self, other: &GenerationStats) {
        self.requests += other.requests;
        self.client_calls += other.client_calls;
        self.generated += other.generated;
        self.dropped_parse += other.dropped_parse;
        self.dropped_dedup += other.dropped_dedup;
        self.emitted += other.emitted;
        self.surplus += other.surplus;
    }
}

/// Records plus accounting. `errors` is non-empty when the client gave up
/// after retries; the records gathered up to that point are still returned.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GenerationOutcome {
    pub records: Vec<InstructionRecord>,
    pub stats: GenerationStats,
    pub errors: Vec<String>,
}
