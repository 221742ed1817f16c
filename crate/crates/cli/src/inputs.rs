//! Loading models, datasets and metric sources from files.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use qmcdm_core::{
    parse_dataset, parse_model, validate_model, Alternative, DatasetFormat, DatasetSchema,
    QualityModel,
};
use qmcdm_providers::{
    resolve_metrics, static_sources, FixtureTransport, GithubClient, LiveTransport, MetricCache,
    MetricSource, Resolver, SourceKind, Transport,
};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INVALID_MODEL: u8 = 3;
pub const EXIT_INVALID_DATA: u8 = 4;

/// An error that maps to a specific process exit code. Each line goes to
/// standard error.
#[derive(Debug)]
pub struct Failure {
    pub exit_code: u8,
    pub lines: Vec<String>,
}

impl Failure {
    pub fn new(exit_code: u8, line: impl Into<String>) -> Self {
        Self {
            exit_code,
            lines: vec![line.into()],
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.lines.join("\n"))
    }
}

impl std::error::Error for Failure {}

/// Reads, parses and validates a model document.
pub fn load_model(path: &Path) -> anyhow::Result<QualityModel> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let model = parse_model(&text)
        .map_err(|e| Failure::new(EXIT_INVALID_MODEL, format!("{}: {e}", path.display())))?;
    let issues = validate_model(&model);
    if !issues.is_empty() {
        let mut lines = vec![format!(
            "{}: {} validation issue(s)",
            path.display(),
            issues.len()
        )];
        lines.extend(issues.iter().map(|i| format!("  {i}")));
        return Err(Failure {
            exit_code: EXIT_INVALID_MODEL,
            lines,
        }
        .into());
    }
    Ok(model)
}

pub fn format_for(path: &Path, explicit: Option<DatasetFormat>) -> DatasetFormat {
    explicit.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("json") => DatasetFormat::Json,
        _ => DatasetFormat::Csv,
    })
}

pub fn load_dataset(
    path: &Path,
    format: Option<DatasetFormat>,
    model: &QualityModel,
) -> anyhow::Result<Vec<Alternative>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_dataset(
        &text,
        format_for(path, format),
        &DatasetSchema::from_model(model),
    )
    .map_err(|e| Failure::new(EXIT_INVALID_DATA, format!("{}: {e}", path.display())).into())
}

/// How missing measurements get filled.
#[derive(Debug, Default, Clone)]
pub struct SourceOptions {
    /// JSON array of metric sources; every binding defaults to static.
    pub sources: Option<PathBuf>,
    /// Replay recorded API responses from this directory.
    pub fixtures: Option<PathBuf>,
    /// JSON-lines cache file, read before and written after fetching.
    pub cache: Option<PathBuf>,
    pub cache_ttl_hours: i64,
}

pub fn load_sources(
    opts: &SourceOptions,
    model: &QualityModel,
) -> anyhow::Result<Vec<MetricSource>> {
    let Some(path) = &opts.sources else {
        return Ok(static_sources(model));
    };
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::new(EXIT_INVALID_DATA, format!("{}: {e}", path.display())).into())
}

/// Completes measurements from the configured sources. Cells that cannot be
/// filled are reported and fail the command.
pub fn resolve(
    model: &QualityModel,
    alternatives: Vec<Alternative>,
    opts: &SourceOptions,
) -> anyhow::Result<Vec<Alternative>> {
    let sources = load_sources(opts, model)?;
    let hosted = sources
        .iter()
        .any(|s| matches!(s.kind, SourceKind::Github { .. }));
    let resolver = if hosted {
        let transport: Arc<dyn Transport> = match &opts.fixtures {
            Some(dir) => Arc::new(FixtureTransport::new(dir)),
            None => Arc::new(LiveTransport::from_env()),
        };
        let ttl = chrono::Duration::hours(opts.cache_ttl_hours);
        let cache = match &opts.cache {
            Some(path) => MetricCache::load(path, ttl)?,
            None => MetricCache::new(ttl),
        };
        Resolver::new(GithubClient::new(transport), Arc::new(cache))
    } else {
        Resolver::offline()
    };
    let res = resolve_metrics(model, &alternatives, &sources, &resolver)
        .map_err(|e| Failure::new(EXIT_INVALID_DATA, e.to_string()))?;
    if let (true, Some(path)) = (hosted, &opts.cache) {
        resolver.cache().save(path)?;
    }
    for s in &res.stale {
        tracing::warn!(
            "{} / {}: serving value fetched {} ({})",
            s.alternative,
            s.source,
            s.fetched_at,
            s.refresh_error
        );
    }
    if !res.failures.is_empty() {
        let mut lines = vec![format!(
            "{} measurement(s) could not be supplied",
            res.failures.len()
        )];
        lines.extend(res.failures.iter().map(|f| {
            format!(
                "  {} / {}: {} ({})",
                f.alternative, f.source, f.message, f.code
            )
        }));
        return Err(Failure {
            exit_code: EXIT_INVALID_DATA,
            lines,
        }
        .into());
    }
    Ok(res.alternatives)
}
