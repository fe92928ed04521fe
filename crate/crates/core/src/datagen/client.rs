use alloc::{string::String, vec::Vec};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClientError {
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("service returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed service response: {0}")]
    BadResponse(String),
}

/// Connection settings shared by client implementations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientSettings {
    pub endpoint: String,
    pub timeout_ms: u64,
    pub max_in_flight: usize,
    /// Extra attempts per request after the first failure.
    pub retries: u32,
}

impl Default for ClientSettings {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            timeout_ms: 30_000,
            max_in_flight: 4,
            retries: 2,
        }
    }
}

/// Text-in / text-out completion service.
pub trait CompletionClient {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError>;

    /// Runs a round of requests, possibly concurrently. Results must come
    /// back in request order.
    fn complete_all(&self, requests: &[CompletionRequest]) -> Vec<Result<String, ClientError>> {
        requests.iter().map(|r| self.complete(r)).collect()
    }

    /// Upper bound on requests worth issuing in one round.
    fn max_in_flight(&self) -> usize {
        1
    }
}

/// Issues `requests`, re-sending failures up to `retries` more times.
/// Returns per-request results in request order and the number of client calls.
pub fn call_with_retries(
    client: &dyn CompletionClient,
    requests: &[CompletionRequest],
    retries: u32,
) -> (Vec<Result<String, ClientError>>, usize) {
    let mut results = client.complete_all(requests);
    let mut calls = requests.len();
    for _ in 0..retries {
        let pending: Vec<usize> = (0..results.len())
            .filter(|&i| results[i].is_err())
            .collect();
        if pending.is_empty() {
            break;
        }
        let again: Vec<CompletionRequest> = pending.iter().map(|&i| requests[i].clone()).collect();
        calls += again.len();
        for (i, r) in pending.into_iter().zip(client.complete_all(&again)) {
            results[i] = r;
        }
    }
    (results, calls)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::cell::Cell;

    /// Fails the first `fail` calls, then echoes.
    struct Flaky {
        fail: Cell<u32>,
    }

    impl CompletionClient for Flaky {
        fn complete(&self, r: &CompletionRequest) -> Result<String, ClientError> {
            if self.fail.get() > 0 {
                self.fail.set(self.fail.get() - 1);
                return Err(ClientError::Timeout);
            }
            Ok(r.prompt.clone())
        }
    }

    fn reqs(n: usize) -> Vec<CompletionRequest> {
        (0..n)
            .map(|i| CompletionRequest {
                prompt: alloc::format!("p{i}"),
                max_tokens: 8,
            })
            .collect()
    }

    #[test]
    fn retries_recover_and_keep_order() {
        let c = Flaky { fail: Cell::new(2) };
        let (out, calls) = call_with_retries(&c, &reqs(3), 1);
        assert_eq!(calls, 5);
        let texts: Vec<String> = out.into_iter().map(Result::unwrap).collect();
        assert_eq!(texts, ["p0", "p1", "p2"]);
    }

    #[test]
    fn gives_up_after_budget() {
        let c = Flaky {
            fail: Cell::new(10),
        };
        let (out, calls) = call_with_retries(&c, &reqs(2), 2);
        assert_eq!(calls, 6);
        assert!(out.iter().all(Result::is_err));
    }
}
