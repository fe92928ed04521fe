use serde::{Deserialize, Serialize};

use super::{Document, Stream};

/// Per-stream document counts and token shares of an ordered corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MixtureStats {
    /// Indexed by [`Stream::index`].
    pub counts: [usize; 4],
    pub tokens: [u64; 4],
    /// `tokens / total tokens`; all zero for an empty corpus.
    pub shares: [f64; 4],
}

impl MixtureStats {
    pub fn total_docs(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn share(&self, s: Stream) -> f64 {
        self.shares[s.index()]
    }
}

pub fn mixture_stats<'a>(docs: impl IntoIterator<Item = &'a Document>) -> MixtureStats {
    let mut stats = MixtureStats::default();
    for d in docs {
        let i = d.stream().index();
        stats.counts[i] += 1;
        stats.tokens[i] += d.token_len() as u64;
    }
    let total: u64 = stats.tokens.iter().sum();
    if total > 0 {
        for i in 0..4 {
            stats.shares[i] = stats.tokens[i] as f64 / total as f64;
        }
    }
    stats
}
