//! Metric providers: fill the measurements a quality model's leaves are
//! bound to, from the dataset itself or from a hosted repository API.
//!
//! Live access is optional. [`FixtureTransport`] replays recorded
//! responses so everything runs offline and deterministically.

pub mod cache;
pub mod github;
pub mod resolve;
pub mod source;
pub mod transport;

pub use cache::{CacheError, CacheRecord, CachedValue, MetricCache};
pub use github::{Clock, GithubClient, GithubError, Sleeper};
pub use resolve::{
    resolve_metrics, CellFailure, Resolution, Resolver, StaleCell, DEFAULT_CONCURRENCY,
};
pub use source::{
    check_sources, parse_repository, repository_of, static_sources, GithubMetric, MetricSource,
    SourceError, SourceKind,
};
pub use transport::{
    fixture_name, FixtureTransport, HttpResponse, LiveTransport, Transport, TransportError,
};
