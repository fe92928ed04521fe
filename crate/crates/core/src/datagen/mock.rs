use alloc::{format, string::String, vec::Vec};

use rand::Rng;

use super::client::{ClientError, CompletionClient, CompletionRequest};
use super::templates::{COUNT_PREFIX, MATERIAL_END, MATERIAL_START, SELF_QA_TASK};
use crate::rng;

const VERBS: [&str; 8] = [
    "Summarize",
    "Explain",
    "List",
    "Compare",
    "Describe",
    "Classify",
    "Rewrite",
    "Evaluate",
];

const WORDS: [&str; 48] = [
    "asset", "bond", "budget", "capital", "cash", "credit", "debt", "dividend", "equity", "fund",
    "hedge", "income", "index", "interest", "loan", "margin", "market", "profit", "rate", "risk",
    "share", "stock", "tax", "yield", "garden", "river", "music", "travel", "recipe", "school",
    "weather", "poem", "history", "planet", "forest", "sport", "health", "city", "language",
    "robot", "ocean", "movie", "coffee", "bridge", "winter", "library", "engine", "festival",
];

/// Offline stand-in for a completion service.
///
/// The completion is a pure function of `(seed, prompt)`. It reads the
/// requested pair count from the prompt's `Count:` line and returns exactly
/// that many `Q:`/`A:` units. With probability `malformed_rate` a unit's
/// answer line is left empty, which the parser counts as one failure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MockClient {
    pub seed: u64,
    pub malformed_rate: f64,
    pub max_in_flight: usize,
}

impl MockClient {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            malformed_rate: 0.0,
            max_in_flight: 4,
        }
    }

    pub fn with_malformed_rate(mut self, rate: f64) -> Self {
        self.malformed_rate = rate;
        self
    }
}

fn requested_count(prompt: &str) -> usize {
    prompt
        .lines()
        .rev()
        .find_map(|l| l.strip_prefix(COUNT_PREFIX))
        .and_then(|n| n.trim().parse().ok())
        .unwrap_or(1)
}

fn material_words(prompt: &str) -> Vec<String> {
    let start = match prompt.find(MATERIAL_START) {
        Some(i) => i + MATERIAL_START.len(),
        None => return Vec::new(),
    };
    let end = prompt[start..]
        .find(MATERIAL_END)
        .map_or(prompt.len(), |i| start + i);
    let mut words: Vec<String> = prompt[start..end]
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| w.chars().count() >= 3)
        .map(String::from)
        .collect();
    words.dedup();
    words
}

impl CompletionClient for MockClient {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError> {
        let mut rng = rng::seeded(
            self.seed ^ rng::fnv1a(request.prompt.as_bytes()),
            0x4d4f_434b,
        );
        let count = requested_count(&request.prompt);
        let qa = request.prompt.contains(SELF_QA_TASK);
        let material = if qa {
            material_words(&request.prompt)
        } else {
            Vec::new()
        };
        let mut out = String::new();
        for _ in 0..count {
            let (q, a) = if qa && !material.is_empty() {
                let w = &material[rng.gen_range(0..material.len())];
                let v = &material[rng.gen_range(0..material.len())];
                let tag = WORDS[rng.gen_range(0..WORDS.len())];
                (
                    format!("What does the material say about {w} regarding {tag}?"),
                    format!("It links {w} with {v}."),
                )
            } else {
                let verb = VERBS[rng.gen_range(0..VERBS.len())];
                let n = rng.gen_range(4..=6);
                let topic: Vec<&str> = (0..n)
                    .map(|_| WORDS[rng.gen_range(0..WORDS.len())])
                    .collect();
                (
                    format!("{verb} {}.", topic.join(" ")),
                    format!("A short answer about {} and {}.", topic[0], topic[n - 1]),
                )
            };
            let answer = if rng.gen_bool(self.malformed_rate.clamp(0.0, 1.0)) {
                String::new()
            } else {
                a
            };
            out.push_str(&format!("Q: {q}\nA: {answer}\n"));
        }
        Ok(out)
    }

    fn max_in_flight(&self) -> usize {
        self.max_in_flight.max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{parse_pairs, templates};

    fn req(prompt: String) -> CompletionRequest {
        CompletionRequest {
            prompt,
            max_tokens: 256,
        }
    }

    #[test]
    fn pure_and_exact_count() {
        let m = MockClient::new(3);
        let r = req(templates::self_qa_prompt(
            "Quarterly revenue rose on lending margins.",
            5,
        ));
        let a = m.complete(&r).unwrap();
        assert_eq!(a, m.complete(&r).unwrap());
        let p = parse_pairs(&a);
        assert_eq!((p.pairs.len(), p.failures), (5, 0));
        assert_ne!(a, MockClient::new(4).complete(&r).unwrap());
    }

    #[test]
    fn malformed_units_are_counted_once() {
        let m = MockClient::new(9).with_malformed_rate(0.5);
        let p = parse_pairs(
            &m.complete(&req(templates::self_qa_prompt("Cash flow improved.", 40)))
                .unwrap(),
        );
        assert_eq!(p.units(), 40);
        assert!(p.failures > 5 && p.failures < 35);
    }
}
