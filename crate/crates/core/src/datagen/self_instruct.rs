use alloc::{format, vec::Vec};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::client::{call_with_retries, CompletionClient, CompletionRequest};
use super::dedup::{DedupIndex, DEFAULT_DEDUP_THRESHOLD};
use super::{parse_pairs, templates, DatagenError, GenerationOutcome, Result};
use crate::corpus::{InstructionRecord, InstructionSource};
use crate::rng;

const SAMPLE_STREAM: u64 = 0x5345_4c46;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfInstructConfig {
    pub target_count: usize,
    pub seed: u64,
    pub examples_per_prompt: usize,
    pub pairs_per_request: usize,
    pub dedup_threshold: f64,
    /// Extra attempts per request after a client failure.
    pub retries: u32,
    /// Logical request cap; `None` means `2 * ceil(target / pairs_per_request) + 4`.
    pub max_requests: Option<usize>,
    pub max_tokens: usize,
}

impl SelfInstructConfig {
    pub fn new(target_count: usize, seed: u64) -> Self {
        Self {
            target_count,
            seed,
            examples_per_prompt: 3,
            pairs_per_request: 4,
            dedup_threshold: DEFAULT_DEDUP_THRESHOLD,
            retries: 2,
            max_requests: None,
            max_tokens: 512,
        }
    }

    pub fn request_budget(&self) -> usize {
        let per = self.pairs_per_request.max(1);
        self.max_requests
            .unwrap_or(2 * self.target_count.div_ceil(per) + 4)
    }

    /// Hard bound on client calls: every logical request may be retried.
    pub fn call_budget(&self) -> usize {
        self.request_budget() * (1 + self.retries as usize)
    }
}

/// Expands `seeds` into up to `cfg.target_count` new instruction records.
///
/// Requests are issued in rounds of at most `client.max_in_flight()`; each
/// round's completions are handled in request order. Generated instructions
/// are deduplicated against the seeds and each other. Stops once the target
/// is met or the request budget is spent; a client failure that survives its
/// retries ends the run with the records gathered so far.
pub fn self_instruct_expand(
    seeds: &[InstructionRecord],
    client: &dyn CompletionClient,
    cfg: &SelfInstructConfig,
) -> Result<GenerationOutcome> {
    if seeds.is_empty() {
        return Err(DatagenError::NoSeeds);
    }
    for s in seeds {
        s.validate()?;
    }
    let mut out = GenerationOutcome::default();
    let mut index = DedupIndex::new(cfg.dedup_threshold);
    for s in seeds {
        index.admit(&s.instruction);
    }
    let mut rng = rng::seeded(cfg.seed, SAMPLE_STREAM);
    let per = cfg.pairs_per_request.max(1);
    let budget = cfg.request_budget();
    let k = cfg.examples_per_prompt.clamp(1, seeds.len());

    while out.records.len() < cfg.target_count
        && out.stats.requests < budget
        && out.errors.is_empty()
    {
        let missing = cfg.target_count - out.records.len();
        let round = client
            .max_in_flight()
            .max(1)
            .min(budget - out.stats.requests)
            .min(missing.div_ceil(per));
        let mut requests = Vec::with_capacity(round);
        for r in 0..round {
            let picks: Vec<&InstructionRecord> = index::sample(&mut rng, seeds.len(), k)
                .into_iter()
                .map(|i| &seeds[i])
                .collect();
            let count = per.min(missing - r * per);
            requests.push(CompletionRequest {
                prompt: templates::self_instruct_prompt(&picks, out.stats.requests + r, count),
                max_tokens: cfg.max_tokens,
            });
        }
        let (results, calls) = call_with_retries(client, &requests, cfg.retries);
        out.stats.requests += round;
        out.stats.client_calls += calls;

        for (i, result) in results.into_iter().enumerate() {
            let text = match result {
                Ok(t) => t,
                Err(e) => {
                    out.errors
                        .push(format!("request {}: {e}", out.stats.requests - round + i));
                    continue;
                }
            };
            let parsed = parse_pairs(&text);
            out.stats.dropped_parse += parsed.failures;
            out.stats.generated += parsed.failures;
            let total = parsed.pairs.len();
            for (j, (q, a)) in parsed.pairs.into_iter().enumerate() {
                if out.records.len() == cfg.target_count {
                    out.stats.surplus += total - j;
                    break;
                }
                out.stats.generated += 1;
                if !index.admit(&q) {
                    out.stats.dropped_dedup += 1;
                    continue;
                }
                let rec = InstructionRecord {
                    instruction: q,
                    input: None,
                    output: a,
                    source: InstructionSource::SelfInstruct,
                    provenance: None,
                };
                rec.validate()?;
                out.records.push(rec);
            }
        }
    }
    out.stats.emitted = out.records.len();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{ClientError, MockClient};
    use alloc::string::String;
    use core::cell::Cell;

    fn seeds() -> Vec<InstructionRecord> {
        [
            "Name three stock indices.",
            "Explain what a bond coupon is.",
            "Write a haiku about rain.",
        ]
        .iter()
        .map(|q| InstructionRecord {
            instruction: (*q).into(),
            input: None,
            output: "answer".into(),
            source: InstructionSource::Seed,
            provenance: None,
        })
        .collect()
    }

    #[test]
    fn target_zero_and_no_seeds() {
        let m = MockClient::new(1);
        let out = self_instruct_expand(&seeds(), &m, &SelfInstructConfig::new(0, 5)).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.stats.client_calls, 0);
        assert_eq!(
            self_instruct_expand(&[], &m, &SelfInstructConfig::new(3, 5)),
            Err(DatagenError::NoSeeds)
        );
    }

    #[test]
    fn exact_target_and_determinism() {
        let m = MockClient::new(7);
        let cfg = SelfInstructConfig::new(25, 11);
        let a = self_instruct_expand(&seeds(), &m, &cfg).unwrap();
        assert_eq!(a.records.len(), 25);
        assert!(a.errors.is_empty());
        assert!(a
            .records
            .iter()
            .all(|r| r.source == InstructionSource::SelfInstruct && r.validate().is_ok()));
        assert!(a.stats.reconciles());
        assert!(a.stats.client_calls <= cfg.call_budget());
        assert_eq!(a, self_instruct_expand(&seeds(), &m, &cfg).unwrap());
        let other = self_instruct_expand(&seeds(), &m, &SelfInstructConfig::new(25, 12)).unwrap();
        assert_ne!(a.records, other.records);
    }

    #[test]
    fn malformed_output_is_counted() {
        let m = MockClient::new(2).with_malformed_rate(0.3);
        let cfg = SelfInstructConfig::new(20, 3);
        let out = self_instruct_expand(&seeds(), &m, &cfg).unwrap();
        assert!(out.stats.dropped_parse > 0);
        assert!(out.stats.reconciles());
        assert_eq!(out.stats.emitted, out.records.len());
    }

    /// Echoes one fixed completion regardless of prompt.
    struct Fixed(String);

    impl CompletionClient for Fixed {
        fn complete(&self, _: &CompletionRequest) -> core::result::Result<String, ClientError> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn budget_stops_repeating_client() {
        let c = Fixed("Q: Same question every time?\nA: Yes.\n".into());
        let cfg = SelfInstructConfig::new(10, 0);
        let out = self_instruct_expand(&seeds(), &c, &cfg).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.stats.requests, cfg.request_budget());
        assert_eq!(out.stats.dropped_dedup, cfg.request_budget() - 1);
        assert!(out.stats.reconciles());
    }

    struct Broken {
        calls: Cell<usize>,
    }

    impl CompletionClient for Broken {
        fn complete(&self, _: &CompletionRequest) -> core::result::Result<String, ClientError> {
            self.calls.set(self.calls.get() + 1);
            Err(ClientError::Timeout)
        }
    }

    #[test]
    fn client_failure_gives_partial_result() {
        let c = Broken {
            calls: Cell::new(0),
        };
        let cfg = SelfInstructConfig::new(8, 0);
        let out = self_instruct_expand(&seeds(), &c, &cfg).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.errors.len(), 1);
        assert_eq!(c.calls.get(), 1 + cfg.retries as usize);
        assert_eq!(out.stats.client_calls, c.calls.get());
    }
}
