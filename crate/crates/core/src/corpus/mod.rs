//! Byte tokenization, the four-stream hybrid-tuning mixer and fixed-length
//! packing with loss masks.

mod document;
mod pack;
mod shuffle;
mod stats;
pub mod synthetic;
mod tokenizer;

pub use document::{Content, Document, Domain, InstructionRecord, InstructionSource, Kind, Stream};
pub use pack::{pack, LossPolicy, Packed, PackedBatch, PackedSequence, Segment};
pub use shuffle::{hybrid_shuffle, MixturePlan};
pub use stats::{mixture_stats, MixtureStats};
pub use tokenizer::{
    detokenize, detokenize_to_string, format_instruction, tokenize, tokenize_bytes,
    FormattedInstruction, DOC_SEP, PAD, RESP, VOCAB_SIZE,
};

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("token id {0} is outside the byte vocabulary")]
    InvalidToken(u32),
    #[error("detokenized bytes are not valid UTF-8")]
    InvalidUtf8,
    #[error("invalid instruction record: {0}")]
    InvalidRecord(String),
    #[error("document {0:?} has empty text")]
    EmptyText(String),
    #[error("document id {0:?} appears more than once")]
    DuplicateId(String),
    #[error("document {id:?} belongs to stream {found} but was placed in {expected}")]
    WrongStream {
        id: String,
        expected: Stream,
        found: Stream,
    },
    #[error("mixture plan has no documents")]
    EmptyPlan,
    #[error("sequence length must be at least 2, got {0}")]
    SeqLenTooSmall(usize),
    #[error("batch size must be at least 1")]
    EmptyBatch,
}

pub type Result<T> = core::result::Result<T, CorpusError>;
