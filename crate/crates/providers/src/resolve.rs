use std::collections::BTreeSet;
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use parking_lot::Mutex;
use qmcdm_core::{Alternative, QualityModel, RawValue};
use serde::Serialize;

use crate::cache::MetricCache;
use crate::github::GithubClient;
use crate::source::{
    check_sources, repository_of, GithubMetric, MetricSource, SourceError, SourceKind,
};

pub const DEFAULT_CONCURRENCY: usize = 4;

/// A value that could not be supplied. Evaluation refuses alternatives with
/// missing cells, so callers usually surface these and stop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellFailure {
    pub alternative: String,
    pub source: String,
    pub code: String,
    pub message: String,
}

/// A cached value served past its ttl because the refresh failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StaleCell {
    pub alternative: String,
    pub source: String,
    pub fetched_at: DateTime<Utc>,
    pub refresh_error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub alternatives: Vec<Alternative>,
    pub failures: Vec<CellFailure>,
    pub stale: Vec<StaleCell>,
}

impl Resolution {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

pub struct Resolver {
    github: Option<GithubClient>,
    cache: Arc<MetricCache>,
    concurrency: usize,
}

impl Resolver {
    /// Static sources only; hosted sources report `offline` failures.
    pub fn offline() -> Self {
        Self {
            github: None,
            cache: Arc::new(MetricCache::new(Duration::hours(24))),
            concurrency: DEFAULT_CONCURRENCY,
        }
    }

    pub fn new(github: GithubClient, cache: Arc<MetricCache>) -> Self {
        Self {
            github: Some(github),
            cache,
            concurrency: DEFAULT_CONCURRENCY,
        }
    }

    pub fn with_concurrency(mut self, n: usize) -> Self {
        self.concurrency = n.max(1);
        self
    }

    pub fn cache(&self) -> &Arc<MetricCache> {
        &self.cache
    }
}

struct Job {
    alt: usize,
    source: String,
    owner: String,
    repo: String,
    metric: GithubMetric,
}

enum Outcome {
    Value(RawValue),
    Stale(RawValue, StaleCell),
    Failed(CellFailure),
}

/// Completes every bound measurement of every alternative. Values already
/// present are kept; the inputs are not modified.
pub fn resolve_metrics(
    model: &QualityModel,
    alternatives: &[Alternative],
    sources: &[MetricSource],
    resolver: &Resolver,
) -> Result<Resolution, SourceError> {
    check_sources(model, sources)?;
    let bound: BTreeSet<&str> = model
        .metric_bindings
        .iter()
        .map(|b| b.source.as_str())
        .collect();
    let mut out: Vec<Alternative> = alternatives.to_vec();
    let mut failures = Vec::new();
    let mut jobs = Vec::new();

    let fail = |alt: &Alternative, source: &str, code: &str, message: String| CellFailure {
        alternative: alt.id.clone(),
        source: source.to_string(),
        code: code.to_string(),
        message,
    };

    for (i, alt) in alternatives.iter().enumerate() {
        for source in sources.iter().filter(|s| bound.contains(s.id.as_str())) {
            if alt.measurements.contains_key(&source.id) {
                continue;
            }
            match &source.kind {
                SourceKind::Static => failures.push(fail(
                    alt,
                    &source.id,
                    "missing-value",
                    "no value in the dataset".into(),
                )),
                SourceKind::Github {
                    metric,
                    owner,
                    repo,
                } => {
                    let repository = match (owner, repo) {
                        (Some(o), Some(r)) => Some((o.clone(), r.clone())),
                        _ => repository_of(alt),
                    };
                    let Some((owner, repo)) = repository else {
                        failures.push(fail(
                            alt,
                            &source.id,
                            "no-repository",
                            "alternative names no repository".into(),
                        ));
                        continue;
                    };
                    if resolver.github.is_none() {
                        failures.push(fail(
                            alt,
                            &source.id,
                            "offline",
                            "no repository client configured".into(),
                        ));
                        continue;
                    }
                    jobs.push(Job {
                        alt: i,
                        source: source.id.clone(),
                        owner,
                        repo,
                        metric: *metric,
                    });
                }
            }
        }
    }

    let mut stale = Vec::new();
    if let Some(client) = &resolver.github {
        let results = run_jobs(
            client,
            &resolver.cache,
            alternatives,
            jobs,
            resolver.concurrency,
        );
        for (job, outcome) in results {
            let alt = &mut out[job.alt];
            match outcome {
                Outcome::Value(v) => {
                    alt.measurements.insert(job.source, v);
                }
                Outcome::Stale(v, cell) => {
                    alt.measurements.insert(job.source, v);
                    stale.push(cell);
                }
                Outcome::Failed(f) => failures.push(f),
            }
        }
    }
    failures.sort_by(|a, b| (&a.alternative, &a.source).cmp(&(&b.alternative, &b.source)));
    stale.sort_by(|a, b| (&a.alternative, &a.source).cmp(&(&b.alternative, &b.source)));
    Ok(Resolution {
        alternatives: out,
        failures,
        stale,
    })
}

fn run_jobs(
    client: &GithubClient,
    cache: &MetricCache,
    alternatives: &[Alternative],
    jobs: Vec<Job>,
    concurrency: usize,
) -> Vec<(Job, Outcome)> {
    let workers = concurrency.min(jobs.len());
    let queue = Mutex::new(jobs.into_iter());
    let done = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let Some(job) = queue.lock().next() else {
                    break;
                };
                let outcome = run_job(client, cache, &alternatives[job.alt].id, &job);
                done.lock().push((job, outcome));
            });
        }
    });
    let mut done = done.into_inner();
    done.sort_by(|(a, _), (b, _)| (a.alt, &a.source).cmp(&(b.alt, &b.source)));
    done
}

fn run_job(client: &GithubClient, cache: &MetricCache, alt_id: &str, job: &Job) -> Outcome {
    let now = client.now();
    let cached = cache.get(&job.source, alt_id, now);
    if let Some(c) = &cached {
        if !c.expired {
            return Outcome::Value(c.value.clone());
        }
    }
    match client.fetch_github_metric(&job.owner, &job.repo, job.metric) {
        Ok(v) => {
            cache.insert(&job.source, alt_id, v.clone(), now);
            Outcome::Value(v)
        }
        Err(e) => match cached {
            Some(c) => {
                tracing::warn!(source = %job.source, alternative = alt_id, "serving stale value: {e}");
                Outcome::Stale(
                    c.value,
                    StaleCell {
                        alternative: alt_id.to_string(),
                        source: job.source.clone(),
                        fetched_at: c.fetched_at,
                        refresh_error: e.to_string(),
                    },
                )
            }
            None => Outcome::Failed(CellFailure {
                alternative: alt_id.to_string(),
                source: job.source.clone(),
                code: e.code().to_string(),
                message: e.to_string(),
            }),
        },
    }
}
