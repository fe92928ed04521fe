use alloc::{collections::BTreeSet, string::String, vec::Vec};

use crate::corpus::InstructionRecord;

pub const DEFAULT_DEDUP_THRESHOLD: f64 = 0.7;

/// Lowercase, replace non-alphanumerics by spaces, collapse whitespace.
pub fn normalize(text: &str) -> String {
    let mapped: String = text
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Sorted, distinct character trigrams of the normalized text. Texts shorter
/// than three characters contribute one padded shingle.
pub fn trigrams(text: &str) -> Vec<[char; 3]> {
    let chars: Vec<char> = normalize(text).chars().collect();
    let set: BTreeSet<[char; 3]> = match chars.len() {
        0 => BTreeSet::new(),
        1 => [[chars[0], '\0', '\0']].into_iter().collect(),
        2 => [[chars[0], chars[1], '\0']].into_iter().collect(),
        _ => chars.windows(3).map(|w| [w[0], w[1], w[2]]).collect(),
    };
    set.into_iter().collect()
}

/// Jaccard index of two sorted distinct shingle lists. Two empty sets count
/// as identical.
pub fn jaccard(a: &[[char; 3]], b: &[[char; 3]]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Accepted instructions so far; new ones are compared against all of them.
#[derive(Debug, Clone, Default)]
pub struct DedupIndex {
    threshold: f64,
    exact: BTreeSet<String>,
    shingles: Vec<Vec<[char; 3]>>,
}

impl DedupIndex {
    pub fn new(threshold: f64) -> Self {
        Self {
            threshold,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.exact.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exact.is_empty()
    }

    /// True if `instruction` is a duplicate of something already admitted.
    pub fn is_duplicate(&self, instruction: &str) -> bool {
        if self.exact.contains(instruction) {
            return true;
        }
        let t = trigrams(instruction);
        self.shingles
            .iter()
            .any(|s| jaccard(s, &t) > self.threshold)
    }

    /// Admits `instruction` unless it is a duplicate; returns whether it was admitted.
    pub fn admit(&mut self, instruction: &str) -> bool {
        if self.is_duplicate(instruction) {
            return false;
        }
        self.exact.insert(instruction.into());
        self.shingles.push(trigrams(instruction));
        true
    }
}

/// Drops records whose instruction equals, or has trigram Jaccard strictly
/// above `threshold` with, an earlier surviving record.
pub fn dedup_filter(records: Vec<InstructionRecord>, threshold: f64) -> Vec<InstructionRecord> {
    let mut index = DedupIndex::new(threshold);
    records
        .into_iter()
        .filter(|r| index.admit(&r.instruction))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::InstructionSource;
    use alloc::format;
    use rand::Rng;

    fn rec(instruction: &str) -> InstructionRecord {
        InstructionRecord {
            instruction: instruction.into(),
            input: None,
            output: "x".into(),
            source: InstructionSource::SelfInstruct,
            provenance: None,
        }
    }

    #[test]
    fn basic_cases() {
        let distinct: Vec<_> = ["Name a river.", "Add two numbers.", "Translate hello."]
            .map(rec)
            .into();
        assert_eq!(
            dedup_filter(distinct.clone(), DEFAULT_DEDUP_THRESHOLD),
            distinct
        );

        let twins = vec![rec("Explain bonds."), rec("Explain bonds.")];
        assert_eq!(dedup_filter(twins, DEFAULT_DEDUP_THRESHOLD).len(), 1);

        // same normalized text is a near-duplicate at the default threshold
        let near = vec![rec("Explain bonds."), rec("explain   BONDS!")];
        assert_eq!(dedup_filter(near, DEFAULT_DEDUP_THRESHOLD).len(), 1);
    }

    #[test]
    fn jaccard_values() {
        assert_eq!(normalize("  Hello,  World! "), "hello world");
        let a = trigrams("abcd");
        assert_eq!(a.len(), 2);
        assert_eq!(jaccard(&a, &trigrams("abce")), 1.0 / 3.0);
        assert_eq!(jaccard(&a, &a), 1.0);
        assert_eq!(jaccard(&a, &trigrams("xyz")), 0.0);
    }

    /// Quadratic oracle: keep record i iff no earlier kept record matches it.
    fn brute_force(records: &[InstructionRecord], threshold: f64) -> Vec<InstructionRecord> {
        let mut kept: Vec<InstructionRecord> = Vec::new();
        for r in records {
            let dup = kept.iter().any(|k| {
                k.instruction == r.instruction
                    || jaccard(&trigrams(&k.instruction), &trigrams(&r.instruction)) > threshold
            });
            if !dup {
                kept.push(r.clone());
            }
        }
        kept
    }

    #[test]
    fn matches_pairwise_oracle() {
        let mut rng = crate::rng::seeded(17, 0);
        let words = ["rate", "bond", "cash", "fund", "risk", "loan"];
        for threshold in [1.0, DEFAULT_DEDUP_THRESHOLD, 0.3] {
            let records: Vec<_> = (0..100)
                .map(|_| {
                    let n = rng.gen_range(1..=3);
                    let ws: Vec<&str> = (0..n)
                        .map(|_| words[rng.gen_range(0..words.len())])
                        .collect();
                    let punct = if rng.gen_bool(0.3) { "!" } else { "" };
                    rec(&format!("{}{punct}", ws.join(" ")))
                })
                .collect();
            let fast = dedup_filter(records.clone(), threshold);
            assert_eq!(fast, brute_force(&records, threshold));
            if threshold == 1.0 {
                let exact: BTreeSet<&str> =
                    records.iter().map(|r| r.instruction.as_str()).collect();
                // Jaccard never exceeds 1, so only exact repeats go
                assert_eq!(fast.len(), exact.len());
            }
        }
    }
}
