//! Synthetic two-domain corpora over disjoint letter alphabets.
//!
//! The general domain writes with `a..=m`, the financial domain with
//! `n..=z`. Each domain has a small seeded lexicon; documents are random word
//! sequences from it, instruction samples ask to reverse a short word list.
//! Shared structure (spaces, punctuation, the `Human:` prompt) is identical
//! across domains, so the only domain signal is the alphabet.

use alloc::{format, string::String, vec::Vec};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Document, Domain, InstructionRecord, InstructionSource, Stream};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub lexicon_size: usize,
    pub pretrain_docs: usize,
    pub instruction_docs: usize,
    pub eval_docs: usize,
    pub min_words: usize,
    pub max_words: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            lexicon_size: 12,
            pretrain_docs: 64,
            instruction_docs: 32,
            eval_docs: 16,
            min_words: 6,
            max_words: 14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoDomainCorpus {
    /// Training documents indexed by [`Stream::index`].
    pub streams: [Vec<Document>; 4],
    /// Held-out pretraining-style text per domain.
    pub eval_general: Vec<Document>,
    pub eval_financial: Vec<Document>,
}

impl TwoDomainCorpus {
    pub fn eval(&self, domain: Domain) -> &[Document] {
        match domain {
            Domain::General => &self.eval_general,
            Domain::Financial => &self.eval_financial,
        }
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.streams.iter().flatten()
    }
}

fn alphabet(domain: Domain) -> core::ops::RangeInclusive<u8> {
    match domain {
        Domain::General => b'a'..=b'm',
        Domain::Financial => b'n'..=b'z',
    }
}

fn lexicon(domain: Domain, size: usize, r: &mut ChaCha8Rng) -> Vec<String> {
    let letters = alphabet(domain);
    let mut words: Vec<String> = Vec::with_capacity(size);
    while words.len() < size {
        let len = r.gen_range(3..=6);
        let w: String = (0..len)
            .map(|_| r.gen_range(letters.clone()) as char)
            .collect();
        if !words.contains(&w) {
            words.push(w);
        }
    }
    words
}

fn sentence(lex: &[String], words: usize, r: &mut ChaCha8Rng) -> String {
    let picked: Vec<&str> = (0..words)
        .map(|_| lex[r.gen_range(0..lex.len())].as_str())
        .collect();
    format!("{}.", picked.join(" "))
}

pub fn two_domain_corpus(spec: &SyntheticSpec) -> TwoDomainCorpus {
    let mut streams: [Vec<Document>; 4] = Default::default();
    let mut eval_general = Vec::new();
    let mut eval_financial = Vec::new();
    for (di, domain) in [Domain::General, Domain::Financial].into_iter().enumerate() {
        let mut r = rng::seeded(spec.seed, 0x5e_0000 + di as u64);
        let lex = lexicon(domain, spec.lexicon_size, &mut r);
        let tag = match domain {
            Domain::General => "gen",
            Domain::Financial => "fin",
        };
        let words = |r: &mut ChaCha8Rng| r.gen_range(spec.min_words..=spec.max_words);
        for i in 0..spec.pretrain_docs {
            let n = words(&mut r);
            let doc =
                Document::pretrain(format!("{tag}-pt-{i}"), domain, sentence(&lex, n, &mut r))
                    .expect("synthetic text is non-empty");
            streams[Stream::new(domain, super::Kind::Pretrain).index()].push(doc);
        }
        for i in 0..spec.instruction_docs {
            let n = r.gen_range(2..=4);
            let items: Vec<&str> = (0..n)
                .map(|_| lex[r.gen_range(0..lex.len())].as_str())
                .collect();
            let reversed: Vec<&str> = items.iter().rev().copied().collect();
            let rec = InstructionRecord {
                instruction: format!("reverse: {}", items.join(" ")),
                input: None,
                output: reversed.join(" "),
                source: InstructionSource::Seed,
                provenance: None,
            };
            let doc = Document::instruction(format!("{tag}-in-{i}"), domain, rec)
                .expect("synthetic record is valid");
            streams[Stream::new(domain, super::Kind::Instruction).index()].push(doc);
        }
        let eval = match domain {
            Domain::General => &mut eval_general,
            Domain::Financial => &mut eval_financial,
        };
        for i in 0..spec.eval_docs {
            let n = words(&mut r);
            eval.push(
                Document::pretrain(format!("{tag}-eval-{i}"), domain, sentence(&lex, n, &mut r))
                    .expect("synthetic text is non-empty"),
            );
        }
    }
    TwoDomainCorpus {
        streams,
        eval_general,
        eval_financial,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Content;

    #[test]
    fn alphabets_are_disjoint() {
        let c = two_domain_corpus(&SyntheticSpec {
            seed: 3,
            ..Default::default()
        });
        let letters = |docs: &[Document]| -> Vec<u8> {
            let mut v: Vec<u8> = docs
                .iter()
                .flat_map(|d| match &d.content {
                    Content::Text(t) => t.bytes().collect::<Vec<_>>(),
                    Content::Instruction(r) => r.output.bytes().collect(),
                })
                .filter(u8::is_ascii_lowercase)
                .collect();
            v.sort();
            v.dedup();
            v
        };
        let g = letters(&c.streams[0]);
        let f = letters(&c.streams[1]);
        assert!(g.iter().all(|b| (b'a'..=b'm').contains(b)));
        assert!(f.iter().all(|b| (b'n'..=b'z').contains(b)));
        assert_eq!(c.streams[2].len(), 32);
        assert_eq!(c.eval_financial.len(), 16);
    }

    #[test]
    fn seeded() {
        let s = SyntheticSpec::default();
        assert_eq!(two_domain_corpus(&s), two_domain_corpus(&s));
        assert_ne!(
            two_domain_corpus(&s),
            two_domain_corpus(&SyntheticSpec { seed: 1, ..s })
        );
    }
}
