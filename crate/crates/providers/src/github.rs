//! Repository metrics from the hosted REST API.

use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, TimeZone, Utc};
use qmcdm_core::RawValue;
use serde::Deserialize;
use thiserror::Error;

use crate::source::GithubMetric;
use crate::transport::{HttpResponse, Transport, TransportError};

const PAGE_SIZE: usize = 100;
/// Upper bound on listing pages, so a misbehaving server cannot loop us.
const MAX_PAGES: usize = 500;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GithubError {
    #[error("repository not found: {owner}/{repo}")]
    NotFound { owner: String, repo: String },
    #[error("rate limit exceeded; resets at {reset}")]
    RateLimited { reset: DateTime<Utc> },
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("unexpected HTTP {status} for {path}")]
    Status { status: u16, path: String },
    #[error("malformed response for {path}: {message}")]
    Decode { path: String, message: String },
    #[error(transparent)]
    Transport(TransportError),
}

impl GithubError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::NotFound { .. } => "repository-not-found",
            Self::RateLimited { .. } => "rate-limited",
            Self::RetriesExhausted { .. } => "retries-exhausted",
            Self::Status { .. } => "http-status",
            Self::Decode { .. } => "malformed-response",
            Self::Transport(_) => "transport",
        }
    }
}

pub type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;
pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

#[derive(Clone)]
pub struct GithubClient {
    transport: Arc<dyn Transport>,
    sleep: Sleeper,
    now: Clock,
    retries: u32,
    backoff_base: Duration,
}

#[derive(Deserialize)]
struct RepoBody {
    forks_count: u64,
    stargazers_count: u64,
}

#[derive(Deserialize)]
struct SearchBody {
    total_count: u64,
}

#[derive(Deserialize)]
struct ReleaseBody {
    #[serde(default)]
    draft: bool,
    published_at: Option<DateTime<Utc>>,
    created_at: Option<DateTime<Utc>>,
}

impl GithubClient {
    /// Three retries on transient failures, sleeping 1s, 2s, then 4s.
    pub fn new(transport: Arc<dyn Transport>) -> Self {
        Self {
            transport,
            sleep: Arc::new(std::thread::sleep),
            now: Arc::new(Utc::now),
            retries: 3,
            backoff_base: Duration::from_secs(1),
        }
    }

    pub fn with_sleeper(mut self, sleep: Sleeper) -> Self {
        self.sleep = sleep;
        self
    }

    pub fn with_clock(mut self, now: Clock) -> Self {
        self.now = now;
        self
    }

    pub fn with_retries(mut self, retries: u32, base: Duration) -> Self {
        self.retries = retries;
        self.backoff_base = base;
        self
    }

    pub fn now(&self) -> DateTime<Utc> {
        (self.now)()
    }

    pub fn fetch_github_metric(
        &self,
        owner: &str,
        repo: &str,
        metric: GithubMetric,
    ) -> Result<RawValue, GithubError> {
        let count = match metric {
            GithubMetric::Forks | GithubMetric::Stars => {
                let body: RepoBody =
                    self.get_json(&format!("/repos/{owner}/{repo}"), owner, repo)?;
                if metric == GithubMetric::Forks {
                    body.forks_count
                } else {
                    body.stargazers_count
                }
            }
            GithubMetric::Contributors => self.count_contributors(owner, repo)?,
            GithubMetric::PullRequests => {
                let path = format!("/search/issues?q=repo:{owner}/{repo}+type:pr&per_page=1");
                self.get_json::<SearchBody>(&path, owner, repo)?.total_count
            }
            GithubMetric::ReleasesPerYear => self.count_recent_releases(owner, repo)?,
        };
        Ok(RawValue::Number(count as f64))
    }

    fn count_contributors(&self, owner: &str, repo: &str) -> Result<u64, GithubError> {
        let mut total = 0u64;
        for page in 1..=MAX_PAGES {
            let path = format!(
                "/repos/{owner}/{repo}/contributors?per_page={PAGE_SIZE}&anon=1&page={page}"
            );
            let resp = self.get(&path, owner, repo)?;
            // an empty repository answers 204 with no body
            if resp.status == 204 {
                break;
            }
            let items: Vec<serde_json::Value> = decode(&path, &resp)?;
            total += items.len() as u64;
            if items.len() < PAGE_SIZE {
                break;
            }
        }
        Ok(total)
    }

    /// Releases published in the 365 days up to now. Listings come newest
    /// first, so paging stops at the first page reaching past the window.
    fn count_recent_releases(&self, owner: &str, repo: &str) -> Result<u64, GithubError> {
        let cutoff = self.now() - chrono::Duration::days(365);
        let mut total = 0u64;
        for page in 1..=MAX_PAGES {
            let path = format!("/repos/{owner}/{repo}/releases?per_page={PAGE_SIZE}&page={page}");
            let resp = self.get(&path, owner, repo)?;
            let items: Vec<ReleaseBody> = decode(&path, &resp)?;
            let mut reached_older = false;
            for r in &items {
                let Some(at) = r.published_at.or(r.created_at) else {
                    continue;
                };
                if at >= cutoff {
                    if !r.draft {
                        total += 1;
                    }
                } else {
                    reached_older = true;
                }
            }
            if items.len() < PAGE_SIZE || reached_older {
                break;
            }
        }
        Ok(total)
    }

    fn get_json<T: serde::de::DeserializeOwned>(
        &self,
        path: &str,
        owner: &str,
        repo: &str,
    ) -> Result<T, GithubError> {
        let resp = self.get(path, owner, repo)?;
        decode(path, &resp)
    }

    /// One GET with retry on transport failures and server errors.
    fn get(&self, path: &str, owner: &str, repo: &str) -> Result<HttpResponse, GithubError> {
        let mut delay = self.backoff_base;
        let mut attempt = 0;
        loop {
            attempt += 1;
            let last = match self.transport.get(path) {
                Ok(resp) => match classify(resp, path, owner, repo) {
                    Ok(resp) => return Ok(resp),
                    Err(Retry::Transient(msg)) => msg,
                    Err(Retry::Fatal(e)) => return Err(e),
                },
                Err(e) if e.is_transient() => e.to_string(),
                Err(e) => return Err(GithubError::Transport(e)),
            };
            if attempt > self.retries {
                return Err(GithubError::RetriesExhausted {
                    attempts: attempt,
                    last,
                });
            }
            tracing::warn!(path, attempt, ?delay, "retrying: {last}");
            (self.sleep)(delay);
            delay *= 2;
        }
    }
}

enum Retry {
    Transient(String),
    Fatal(GithubError),
}

fn classify(
    resp: HttpResponse,
    path: &str,
    owner: &str,
    repo: &str,
) -> Result<HttpResponse, Retry> {
    let exhausted = resp.header("x-ratelimit-remaining") == Some("0");
    match resp.status {
        200..=299 => Ok(resp),
        // search answers 422 when the repository qualifier names nothing
        404 | 422 => Err(Retry::Fatal(GithubError::NotFound {
            owner: owner.to_string(),
            repo: repo.to_string(),
        })),
        403 | 429 if exhausted || resp.status == 429 => {
            let reset = resp
                .header("x-ratelimit-reset")
                .and_then(|s| s.trim().parse::<i64>().ok())
                .and_then(|secs| Utc.timestamp_opt(secs, 0).single());
            match reset {
                Some(reset) => Err(Retry::Fatal(GithubError::RateLimited { reset })),
                None => Err(Retry::Fatal(GithubError::Status {
                    status: resp.status,
                    path: path.to_string(),
                })),
            }
        }
        500..=599 => Err(Retry::Transient(format!("HTTP {} for {path}", resp.status))),
        status => Err(Retry::Fatal(GithubError::Status {
            status,
            path: path.to_string(),
        })),
    }
}

fn decode<T: serde::de::DeserializeOwned>(
    path: &str,
    resp: &HttpResponse,
) -> Result<T, GithubError> {
    serde_json::from_str(&resp.body).map_err(|e| GithubError::Decode {
        path: path.to_string(),
        message: e.to_string(),
    })
}
