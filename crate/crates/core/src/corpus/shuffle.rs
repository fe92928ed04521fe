use alloc::{collections::BTreeSet, vec::Vec};

use rand::seq::SliceRandom;

use super::{CorpusError, Document, Result, Stream};
use crate::rng;

/// The four streams to mix, plus the seed and epoch selecting the order.
#[derive(Debug, Clone, Default)]
pub struct MixturePlan {
    /// Indexed by [`Stream::index`].
    pub streams: [Vec<Document>; 4],
    pub seed: u64,
    pub epoch: u64,
    /// How many copies of each stream enter the epoch. Defaults to 1.
    pub repetition: [u32; 4],
}

impl MixturePlan {
    pub fn new(seed: u64, epoch: u64) -> Self {
        Self {
            streams: Default::default(),
            seed,
            epoch,
            repetition: [1; 4],
        }
    }

    /// Builds a plan by routing each document to the stream its domain and kind name.
    pub fn from_documents(docs: impl IntoIterator<Item = Document>, seed: u64, epoch: u64) -> Self {
        let mut plan = Self::new(seed, epoch);
        for d in docs {
            plan.streams[d.stream().index()].push(d);
        }
        plan
    }

    pub fn stream(&self, s: Stream) -> &[Document] {
        &self.streams[s.index()]
    }

    pub fn len(&self) -> usize {
        self.streams
            .iter()
            .zip(self.repetition)
            .map(|(s, r)| s.len() * r as usize)
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for stream in Stream::ALL {
            for doc in self.stream(stream) {
                doc.validate()?;
                if doc.stream() != stream {
                    return Err(CorpusError::WrongStream {
                        id: doc.id.clone(),
                        expected: stream,
                        found: doc.stream(),
                    });
                }
                if !seen.insert(doc.id.as_str()) {
                    return Err(CorpusError::DuplicateId(doc.id.clone()));
                }
            }
        }
        if self.is_empty() {
            return Err(CorpusError::EmptyPlan);
        }
        Ok(())
    }
}

/// Document-level shuffle of all four streams into one training order.
///
/// Streams are concatenated in [`Stream::ALL`] order (each repeated
/// `repetition` times) and permuted by Fisher-Yates driven by ChaCha8 keyed
/// with `seed` on stream `epoch`. The same plan always yields the same order;
/// epochs draw independent permutations.
pub fn hybrid_shuffle(plan: &MixturePlan) -> Result<Vec<&Document>> {
    plan.validate()?;
    let mut order: Vec<&Document> = Vec::with_capacity(plan.len());
    for stream in Stream::ALL {
        for _ in 0..plan.repetition[stream.index()] {
            order.extend(plan.stream(stream));
        }
    }
    let mut rng = rng::seeded(plan.seed, plan.epoch);
    order.shuffle(&mut rng);
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Domain, InstructionRecord, InstructionSource};
    use alloc::{format, string::String};

    pub(crate) fn plan_with_sizes(sizes: [usize; 4], seed: u64, epoch: u64) -> MixturePlan {
        let mut plan = MixturePlan::new(seed, epoch);
        for stream in Stream::ALL {
            for i in 0..sizes[stream.index()] {
                let id = format!("{}-{i}", stream.name());
                let doc = match stream.kind() {
                    crate::corpus::Kind::Pretrain => {
                        Document::pretrain(id, stream.domain(), "x").unwrap()
                    }
                    crate::corpus::Kind::Instruction => Document::instruction(
                        id,
                        stream.domain(),
                        InstructionRecord {
                            instruction: "q".into(),
                            input: None,
                            output: "a".into(),
                            source: InstructionSource::Seed,
                            provenance: None,
                        },
                    )
                    .unwrap(),
                };
                plan.streams[stream.index()].push(doc);
            }
        }
        plan
    }

    fn ids(order: &[&Document]) -> Vec<String> {
        order.iter().map(|d| d.id.clone()).collect()
    }

    #[test]
    fn permutation_of_union() {
        let plan = plan_with_sizes([3, 2, 1, 1], 11, 0);
        let order = hybrid_shuffle(&plan).unwrap();
        assert_eq!(order.len(), 7);
        let mut got = ids(&order);
        got.sort();
        let mut want: Vec<String> = plan
            .streams
            .iter()
            .flatten()
            .map(|d| d.id.clone())
            .collect();
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn deterministic_per_seed_and_epoch() {
        let plan = plan_with_sizes([20, 10, 5, 5], 7, 3);
        assert_eq!(
            ids(&hybrid_shuffle(&plan).unwrap()),
            ids(&hybrid_shuffle(&plan).unwrap())
        );
        let other_epoch = MixturePlan {
            epoch: 4,
            ..plan.clone()
        };
        assert_ne!(
            ids(&hybrid_shuffle(&plan).unwrap()),
            ids(&hybrid_shuffle(&other_epoch).unwrap())
        );
    }

    #[test]
    fn rejects_duplicates_wrong_streams_and_empty() {
        let mut plan = plan_with_sizes([2, 0, 0, 0], 0, 0);
        let dup = plan.streams[0][0].clone();
        plan.streams[0].push(dup);
        assert!(matches!(
            hybrid_shuffle(&plan),
            Err(CorpusError::DuplicateId(_))
        ));

        let mut plan = plan_with_sizes([1, 0, 0, 0], 0, 0);
        plan.streams[1].push(Document::pretrain("g", Domain::General, "t").unwrap());
        assert!(matches!(
            hybrid_shuffle(&plan),
            Err(CorpusError::WrongStream { .. })
        ));

        assert_eq!(
            hybrid_shuffle(&MixturePlan::new(0, 0)).unwrap_err(),
            CorpusError::EmptyPlan
        );
    }

    #[test]
    fn repetition_factor_duplicates_stream() {
        let mut plan = plan_with_sizes([2, 1, 0, 0], 5, 0);
        plan.repetition = [2, 1, 1, 1];
        let order = hybrid_shuffle(&plan).unwrap();
        assert_eq!(order.len(), 5);
        assert_eq!(
            order
                .iter()
                .filter(|d| d.id == "general_pretrain-0")
                .count(),
            2
        );
    }

    #[test]
    fn first_position_frequency_matches_composition() {
        let trials = 10_000;
        let mut hits = 0;
        for seed in 0..trials {
            let plan = plan_with_sizes([3, 2, 1, 1], seed, 0);
            let order = hybrid_shuffle(&plan).unwrap();
            if order[0].stream() == Stream::FinancialInstruction {
                hits += 1;
            }
        }
        let p = 1.0 / 7.0;
        let n = trials as f64;
        let sigma = libm::sqrt(n * p * (1.0 - p));
        assert!((hits as f64 - n * p).abs() <= 3.0 * sigma, "hits {hits}");
    }
}
