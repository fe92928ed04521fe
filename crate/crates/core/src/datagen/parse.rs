use alloc::{string::String, vec::Vec};

/// Well-formed question/answer pairs and the count of malformed units.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedPairs {
    pub pairs: Vec<(String, String)>,
    pub failures: usize,
}

impl ParsedPairs {
    pub fn units(&self) -> usize {
        self.pairs.len() + self.failures
    }
}

/// Strict `Q:` / `A:` grammar.
///
/// Blank lines are ignored. A `Q:` line immediately followed by an `A:` line
/// is one unit; it is well-formed when both texts are non-empty after
/// trimming. Any other line (a `Q:` without its `A:`, a stray `A:`, free
/// text) is one malformed unit on its own.
pub fn parse_pairs(completion: &str) -> ParsedPairs {
    let mut out = ParsedPairs::default();
    for unit in parse_units(completion) {
        match unit {
            Some(pair) => out.pairs.push(pair),
            None => out.failures += 1,
        }
    }
    out
}

/// The same grammar, keeping unit order: `None` marks a malformed unit.
pub fn parse_units(completion: &str) -> Vec<Option<(String, String)>> {
    let lines: Vec<&str> = completion
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    let mut units = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let question = lines[i].strip_prefix("Q:");
        let answer = lines.get(i + 1).and_then(|l| l.strip_prefix("A:"));
        match (question, answer) {
            (Some(q), Some(a)) => {
                let (q, a) = (q.trim(), a.trim());
                units.push((!q.is_empty() && !a.is_empty()).then(|| (q.into(), a.into())));
                i += 2;
            }
            _ => {
                units.push(None);
                i += 1;
            }
        }
    }
    units
}
