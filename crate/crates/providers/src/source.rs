use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use qmcdm_core::{Alternative, QualityModel};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Repository metrics the hosted client can compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum GithubMetric {
    Forks,
    Stars,
    Contributors,
    PullRequests,
    ReleasesPerYear,
}

impl GithubMetric {
    pub const ALL: [GithubMetric; 5] = [
        Self::Forks,
        Self::Stars,
        Self::Contributors,
        Self::PullRequests,
        Self::ReleasesPerYear,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Forks => "forks",
            Self::Stars => "stars",
            Self::Contributors => "contributors",
            Self::PullRequests => "pullRequests",
            Self::ReleasesPerYear => "releasesPerYear",
        }
    }
}

impl fmt::Display for GithubMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GithubMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown repository metric `{s}`"))
    }
}

/// Where a bound metric's values come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SourceKind {
    /// Values are already present in the dataset.
    Static,
    /// Values are fetched per alternative. Without a fixed `owner`/`repo`,
    /// each alternative names its repository in metadata.
    Github {
        metric: GithubMetric,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        owner: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        repo: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSource {
    pub id: String,
    #[serde(flatten)]
    pub kind: SourceKind,
}

impl MetricSource {
    pub fn static_source(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            kind: SourceKind::Static,
        }
    }

    pub fn github(id: impl Into<String>, metric: GithubMetric) -> Self {
        Self {
            id: id.into(),
            kind: SourceKind::Github {
                metric,
                owner: None,
                repo: None,
            },
        }
    }

    pub fn with_repository(mut self, owner: impl Into<String>, repo: impl Into<String>) -> Self {
        if let SourceKind::Github {
            owner: o, repo: r, ..
        } = &mut self.kind
        {
            *o = Some(owner.into());
            *r = Some(repo.into());
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SourceError {
    #[error("duplicate metric source `{0}`")]
    DuplicateSource(String),
    #[error("metric source `{0}` needs both owner and repo, or neither")]
    IncompleteSource(String),
    #[error("unknown metric source `{0}`")]
    UnknownSource(String),
}

impl SourceError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::DuplicateSource(_) => "duplicate-source",
            Self::IncompleteSource(_) => "incomplete-source",
            Self::UnknownSource(_) => "unknown-source",
        }
    }
}

/// Checks ids are unique, hosted params are complete, and every binding of
/// `model` names a declared source.
pub fn check_sources(model: &QualityModel, sources: &[MetricSource]) -> Result<(), SourceError> {
    let mut seen = BTreeSet::new();
    for s in sources {
        if !seen.insert(s.id.as_str()) {
            return Err(SourceError::DuplicateSource(s.id.clone()));
        }
        if let SourceKind::Github { owner, repo, .. } = &s.kind {
            if owner.is_some() != repo.is_some() {
                return Err(SourceError::IncompleteSource(s.id.clone()));
            }
        }
    }
    for b in &model.metric_bindings {
        if !seen.contains(b.source.as_str()) {
            return Err(SourceError::UnknownSource(b.source.clone()));
        }
    }
    Ok(())
}

/// One static source per distinct binding source of `model`.
pub fn static_sources(model: &QualityModel) -> Vec<MetricSource> {
    let ids: BTreeSet<&str> = model
        .metric_bindings
        .iter()
        .map(|b| b.source.as_str())
        .collect();
    ids.into_iter().map(MetricSource::static_source).collect()
}

/// Metadata keys consulted for an alternative's repository, in order.
pub const REPOSITORY_KEYS: [&str; 2] = ["repository", "url"];

/// `owner/repo` for `alt`, from a `repository` entry (`owner/repo`) or a
/// `github.com` URL in its metadata.
pub fn repository_of(alt: &Alternative) -> Option<(String, String)> {
    REPOSITORY_KEYS
        .iter()
        .filter_map(|k| alt.metadata.get(*k))
        .find_map(|v| parse_repository(v))
}

pub fn parse_repository(text: &str) -> Option<(String, String)> {
    let text = text.trim();
    let path = match text.find("github.com/") {
        Some(i) => &text[i + "github.com/".len()..],
        None if !text.contains(':') => text,
        None => return None,
    };
    let mut parts = path.trim_end_matches('/').split('/');
    let owner = parts.next().filter(|s| !s.is_empty())?;
    let repo = parts
        .next()
        .filter(|s| !s.is_empty())?
        .trim_end_matches(".git");
    if parts.next().is_some() && !text.contains("github.com/") {
        return None;
    }
    Some((owner.to_string(), repo.to_string()))
}
