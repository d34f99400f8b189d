//! HTTP verifier client: POST a JSON [`ScoreRequest`], expect a [`ScoreResponse`].

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use claimpref::verifier::{ScoreRequest, ScoreResponse, VerifierClient, VerifierLogits};
use claimpref::{Error, Result};

#[derive(Debug)]
pub struct RemoteScorer {
    url: String,
    agent: ureq::Agent,
    retries: u32,
    backoff: Duration,
    next_id: AtomicU64,
}

impl RemoteScorer {
    pub fn new(url: &str, timeout: Duration, retries: u32) -> Self {
        Self {
            url: url.to_owned(),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
            retries,
            backoff: Duration::from_millis(200),
            next_id: AtomicU64::new(0),
        }
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn attempt(&self, body: &ScoreRequest) -> std::result::Result<ScoreResponse, (bool, String)> {
        match self.agent.post(&self.url).send_json(body) {
            Ok(resp) => resp.into_json::<ScoreResponse>().map_err(|e| (false, format!("bad response body: {e}"))),
            // 4xx means the request itself is wrong; retrying will not help
            Err(ureq::Error::Status(code, _)) => Err((code >= 500 || code == 429, format!("HTTP {code}"))),
            Err(e) => Err((true, e.to_string())),
        }
    }
}

impl VerifierClient for RemoteScorer {
    fn score(&self, claim: &str, evidence: &[&str]) -> Result<VerifierLogits> {
        let request = ScoreRequest {
            request_id: format!("r{}", self.next_id.fetch_add(1, Ordering::Relaxed)),
            claim: claim.to_owned(),
            evidence: evidence.iter().map(|s| s.to_string()).collect(),
        };
        let mut last = String::new();
        for attempt in 0..=self.retries {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.saturating_pow(attempt - 1));
            }
            match self.attempt(&request) {
                Ok(resp) if resp.request_id != request.request_id => {
                    return Err(Error::Verifier(format!(
                        "response id {} does not match request {}",
                        resp.request_id, request.request_id
                    )));
                }
                Ok(resp) => {
                    let logits = VerifierLogits::from(resp.logits);
                    return if logits.is_finite() {
                        Ok(logits)
                    } else {
                        Err(Error::Verifier(format!("non-finite logits {:?}", resp.logits)))
                    };
                }
                Err((retryable, msg)) => {
                    log::debug!("verifier attempt {} for {} failed: {msg}", attempt + 1, request.request_id);
                    last = msg;
                    if !retryable {
                        break;
                    }
                }
            }
        }
        Err(Error::Verifier(format!("{} after {} attempt(s): {last}", self.url, self.retries + 1)))
    }
}
