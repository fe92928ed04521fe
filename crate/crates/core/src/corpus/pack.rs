use alloc::{string::String, vec, vec::Vec};

use serde::{Deserialize, Serialize};

use super::{format_instruction, tokenize, Content, CorpusError, Document, Result, DOC_SEP, PAD};
use crate::model::ScoredSequence;

/// Which non-padding positions carry loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossPolicy {
    /// Every real token, prompts included.
    #[default]
    Full,
    /// Instruction prompts (everything before the response) are masked out.
    ResponseOnly,
}

/// One fixed-length row of packed tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedSequence {
    pub tokens: Vec<u32>,
    pub mask: Vec<u8>,
}

impl PackedSequence {
    pub fn as_scored(&self) -> ScoredSequence<'_> {
        ScoredSequence {
            tokens: &self.tokens,
            mask: &self.mask,
        }
    }

    /// Positions that contribute a next-token loss (mask set, index >= 1).
    pub fn scored_targets(&self) -> usize {
        self.as_scored().scored_positions()
    }

    pub fn masked_in(&self) -> usize {
        self.mask.iter().filter(|&&m| m != 0).count()
    }
}

/// Where a piece of a document landed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub doc_id: String,
    pub sequence: usize,
    pub start: usize,
    pub len: usize,
}

/// Output of [`pack`].
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Packed {
    pub seq_len: usize,
    pub sequences: Vec<PackedSequence>,
    pub segments: Vec<Segment>,
    /// Ids of instruction samples longer than `seq_len`, in input order.
    pub dropped: Vec<String>,
}

impl Packed {
    pub fn dropped_instructions(&self) -> usize {
        self.dropped.len()
    }

    pub fn masked_in(&self) -> usize {
        self.sequences.iter().map(PackedSequence::masked_in).sum()
    }

    pub fn scored_targets(&self) -> usize {
        self.sequences
            .iter()
            .map(PackedSequence::scored_targets)
            .sum()
    }

    /// Consecutive groups of `batch` sequences; the last one may be short.
    pub fn batches(&self, batch: usize) -> Result<Vec<PackedBatch>> {
        if batch == 0 {
            return Err(CorpusError::EmptyBatch);
        }
        Ok(self
            .sequences
            .chunks(batch)
            .enumerate()
            .map(|(i, chunk)| {
                let first = i * batch;
                let range = first..first + chunk.len();
                PackedBatch {
                    seq_len: self.seq_len,
                    tokens: chunk
                        .iter()
                        .flat_map(|s| s.tokens.iter().copied())
                        .collect(),
                    mask: chunk.iter().flat_map(|s| s.mask.iter().copied()).collect(),
                    segments: self
                        .segments
                        .iter()
                        .filter(|s| range.contains(&s.sequence))
                        .map(|s| Segment {
                            sequence: s.sequence - first,
                            ..s.clone()
                        })
                        .collect(),
                }
            })
            .collect())
    }
}

/// `[batch, seq_len]` token and mask matrices with per-segment provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedBatch {
    pub seq_len: usize,
    pub tokens: Vec<u32>,
    pub mask: Vec<u8>,
    pub segments: Vec<Segment>,
}

impl PackedBatch {
    pub fn batch_size(&self) -> usize {
        self.tokens.len() / self.seq_len
    }

    pub fn rows(&self) -> impl Iterator<Item = ScoredSequence<'_>> {
        self.tokens
            .chunks_exact(self.seq_len)
            .zip(self.mask.chunks_exact(self.seq_len))
            .map(|(tokens, mask)| ScoredSequence { tokens, mask })
    }
}

struct Packer {
    seq_len: usize,
    out: Packed,
    tokens: Vec<u32>,
    mask: Vec<u8>,
}

impl Packer {
    fn flush(&mut self) {
        if self.tokens.is_empty() {
            return;
        }
        self.tokens.resize(self.seq_len, PAD);
        self.mask.resize(self.seq_len, 0);
        self.out.sequences.push(PackedSequence {
            tokens: core::mem::take(&mut self.tokens),
            mask: core::mem::take(&mut self.mask),
        });
    }

    fn room(&self) -> usize {
        self.seq_len - self.tokens.len()
    }

    /// Appends a unit that may wrap across sequences.
    fn push_wrapping(&mut self, id: &str, tokens: &[u32], mask: &[u8]) {
        let mut at = 0;
        while at < tokens.len() {
            let take = self.room().min(tokens.len() - at);
            self.record(id, take);
            self.tokens.extend_from_slice(&tokens[at..at + take]);
            self.mask.extend_from_slice(&mask[at..at + take]);
            at += take;
            if self.room() == 0 {
                self.flush();
            }
        }
    }

    /// Appends a unit that must sit inside one sequence; the caller has
    /// checked it fits in an empty one.
    fn push_whole(&mut self, id: &str, tokens: &[u32], mask: &[u8]) {
        if tokens.len() > self.room() {
            self.flush();
        }
        self.push_wrapping(id, tokens, mask);
    }

    fn record(&mut self, id: &str, len: usize) {
        self.out.segments.push(Segment {
            doc_id: id.into(),
            sequence: self.out.sequences.len(),
            start: self.tokens.len(),
            len,
        });
    }
}

/// Packs documents, in the given order, into rows of exactly `seq_len` tokens.
///
/// Every document is followed by `DOC_SEP`. Pretraining text is concatenated
/// and may run across row boundaries. An instruction sample (formatted
/// tokens plus separator) is never split: if it does not fit in the current
/// row, that row is padded and closed first; a sample longer than `seq_len`
/// is dropped and reported. Padding always has mask 0; under
/// [`LossPolicy::ResponseOnly`] the prompt part of an instruction sample
/// (up to and including `RESP`) has mask 0 as well.
pub fn pack<'a>(
    docs: impl IntoIterator<Item = &'a Document>,
    seq_len: usize,
    policy: LossPolicy,
) -> Result<Packed> {
    if seq_len < 2 {
        return Err(CorpusError::SeqLenTooSmall(seq_len));
    }
    let mut p = Packer {
        seq_len,
        out: Packed {
            seq_len,
            ..Packed::default()
        },
        tokens: Vec::with_capacity(seq_len),
        mask: Vec::with_capacity(seq_len),
    };
    for doc in docs {
        doc.validate()?;
        match &doc.content {
            Content::Text(text) => {
                let mut tokens = tokenize(text);
                tokens.push(DOC_SEP);
                let mask = vec![1u8; tokens.len()];
                p.push_wrapping(&doc.id, &tokens, &mask);
            }
            Content::Instruction(rec) => {
                let f = format_instruction(rec)?;
                let mut tokens = f.tokens;
                tokens.push(DOC_SEP);
                if tokens.len() > seq_len {
                    p.out.dropped.push(doc.id.clone());
                    continue;
                }
                let mut mask = vec![1u8; tokens.len()];
                if policy == LossPolicy::ResponseOnly {
                    mask[..f.response_start].iter_mut().for_each(|m| *m = 0);
                }
                p.push_whole(&doc.id, &tokens, &mask);
            }
        }
    }
    p.flush();
    Ok(p.out)
}
