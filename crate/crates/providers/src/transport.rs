//! HTTP access for the repository client: a live agent and a directory of
//! recorded responses replayed verbatim.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_API_BASE: &str = "https://api.github.com";
pub const TOKEN_ENV: &str = "QMCDM_GITHUB_TOKEN";

/// A response as seen by the client. Header names are lowercase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpResponse {
    pub status: u16,
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    #[serde(default)]
    pub body: String,
}

impl HttpResponse {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .get(&name.to_ascii_lowercase())
            .map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    /// Connection failures and timeouts; the client retries these.
    #[error("request to {path} failed: {message}")]
    Network { path: String, message: String },
    #[error("no recorded response for {path} (expected {file})")]
    MissingFixture { path: String, file: String },
    #[error("recorded response {file} is unreadable: {message}")]
    BadFixture { file: String, message: String },
}

impl TransportError {
    pub fn is_transient(&self) -> bool {
        matches!(self, Self::Network { .. })
    }
}

/// Performs GET requests against the API. `path` starts with `/` and
/// includes the query string.
pub trait Transport: Send + Sync {
    fn get(&self, path: &str) -> Result<HttpResponse, TransportError>;
}

pub struct LiveTransport {
    agent: ureq::Agent,
    base: String,
    token: Option<String>,
}

impl LiveTransport {
    /// Reads the token from `QMCDM_GITHUB_TOKEN` when set.
    pub fn from_env() -> Self {
        let token = std::env::var(TOKEN_ENV)
            .ok()
            .filter(|t| !t.trim().is_empty());
        Self::new(DEFAULT_API_BASE, token)
    }

    pub fn new(base: impl Into<String>, token: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            base: base.into().trim_end_matches('/').to_string(),
            token,
        }
    }
}

impl Transport for LiveTransport {
    fn get(&self, path: &str) -> Result<HttpResponse, TransportError> {
        let network = |e: ureq::Error| TransportError::Network {
            path: path.to_string(),
            message: e.to_string(),
        };
        let mut req = self
            .agent
            .get(format!("{}{path}", self.base))
            .header("Accept", "application/vnd.github+json")
            .header("X-GitHub-Api-Version", "2022-11-28")
            .header("User-Agent", concat!("qmcdm/", env!("CARGO_PKG_VERSION")));
        if let Some(token) = &self.token {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = req.call().map_err(network)?;
        let headers = resp
            .headers()
            .iter()
            .filter_map(|(k, v)| {
                Some((
                    k.as_str().to_ascii_lowercase(),
                    v.to_str().ok()?.to_string(),
                ))
            })
            .collect();
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(network)?;
        Ok(HttpResponse {
            status,
            headers,
            body,
        })
    }
}

/// Replays `<dir>/<fixture_name(path)>`, a JSON `{status, headers, body}`.
pub struct FixtureTransport {
    dir: PathBuf,
}

impl FixtureTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

/// File name for a request path: every run of characters outside
/// `[A-Za-z0-9.-]` becomes one `_`.
///
/// `/repos/twbs/bootstrap/releases?per_page=100&page=1` maps to
/// `repos_twbs_bootstrap_releases_per_page_100_page_1.json`.
pub fn fixture_name(path: &str) -> String {
    let mut out = String::with_capacity(path.len() + 5);
    for c in path.chars() {
        if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
            out.push(c);
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    let trimmed = out.trim_matches('_');
    format!("{trimmed}.json")
}

impl Transport for FixtureTransport {
    fn get(&self, path: &str) -> Result<HttpResponse, TransportError> {
        let file = fixture_name(path);
        let full = self.dir.join(&file);
        let text = std::fs::read_to_string(&full).map_err(|_| TransportError::MissingFixture {
            path: path.to_string(),
            file: full.display().to_string(),
        })?;
        let mut resp: HttpResponse =
            serde_json::from_str(&text).map_err(|e| TransportError::BadFixture {
                file: full.display().to_string(),
                message: e.to_string(),
            })?;
        resp.headers = std::mem::take(&mut resp.headers)
            .into_iter()
            .map(|(k, v)| (k.to_ascii_lowercase(), v))
            .collect();
        Ok(resp)
    }
}
