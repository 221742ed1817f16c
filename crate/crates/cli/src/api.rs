//! HTTP API over the engine.
//!
//! Requests either reference uploaded resources by id or carry the model
//! and dataset inline. Uploaded resources expire after an idle timeout.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::RwLock;
use qmcdm_core::{
    apply_method, compare_methods, evaluate, parse_dataset, parse_model, serialize_model,
    validate_model, what_if, Alternative, DatasetError, DatasetFormat, DatasetSchema, EvalError,
    Method, ModelParseError, ParseErrorKind, QualityModel, ValidationIssue, WhatIfOverride,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(60 * 60);

/// Uniform error body: `{code, message, details[]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEnvelope {
    pub code: String,
    pub message: String,
    pub details: Vec<Value>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    envelope: ErrorEnvelope,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            envelope: ErrorEnvelope {
                code: code.to_string(),
                message: message.into(),
                details: Vec::new(),
            },
        }
    }

    fn with_details(mut self, details: Vec<Value>) -> Self {
        self.envelope.details = details;
        self
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad-request", message)
    }

    fn not_found(kind: &str, id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "not-found",
            format!("no {kind} with id `{id}`"),
        )
    }

    fn issues(issues: &[ValidationIssue]) -> Vec<Value> {
        issues
            .iter()
            .map(|i| serde_json::to_value(i).expect("issues serialize"))
            .collect()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.envelope)).into_response()
    }
}

impl From<ModelParseError> for ApiError {
    fn from(e: ModelParseError) -> Self {
        let code = match e.kind {
            ParseErrorKind::Syntax => "model-syntax",
            ParseErrorKind::MissingHeader => "missing-model-header",
            ParseErrorKind::UnknownAggregationKind => "unknown-aggregation-kind",
            ParseErrorKind::DuplicateId => "duplicate-id",
        };
        let details = e
            .position
            .map(|(line, column)| vec![json!({"line": line, "column": column})])
            .unwrap_or_default();
        Self::new(StatusCode::BAD_REQUEST, code, e.to_string()).with_details(details)
    }
}

impl From<DatasetError> for ApiError {
    fn from(e: DatasetError) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid-dataset", e.to_string())
    }
}

impl From<EvalError> for ApiError {
    fn from(e: EvalError) -> Self {
        let details = Self::issues(e.issues());
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string()).with_details(details)
    }
}

struct Entry<T> {
    value: Arc<T>,
    last_used: Instant,
}

/// An uploaded dataset. Columns are typed against the model at evaluation
/// time, since the same dataset may feed different models.
pub struct StoredDataset {
    pub format: DatasetFormat,
    pub content: String,
}

/// Id-keyed uploads. Entries untouched for longer than the idle timeout
/// are dropped.
pub struct Store<T> {
    prefix: &'static str,
    next: AtomicU64,
    entries: RwLock<HashMap<String, Entry<T>>>,
    idle: Duration,
}

impl<T> Store<T> {
    fn new(prefix: &'static str, idle: Duration) -> Self {
        Self {
            prefix,
            next: AtomicU64::new(1),
            entries: RwLock::new(HashMap::new()),
            idle,
        }
    }

    pub fn insert(&self, value: T) -> String {
        let id = format!(
            "{}-{}",
            self.prefix,
            self.next.fetch_add(1, Ordering::Relaxed)
        );
        self.insert_with_id(id.clone(), value);
        id
    }

    pub fn insert_with_id(&self, id: String, value: T) {
        let mut entries = self.entries.write();
        let now = Instant::now();
        entries.retain(|_, e| now.duration_since(e.last_used) <= self.idle);
        entries.insert(
            id,
            Entry {
                value: Arc::new(value),
                last_used: now,
            },
        );
    }

    /// Snapshot of the entry, refreshing its idle clock.
    pub fn get(&self, id: &str) -> Option<Arc<T>> {
        let mut entries = self.entries.write();
        let now = Instant::now();
        let entry = entries.get_mut(id)?;
        if now.duration_since(entry.last_used) > self.idle {
            entries.remove(id);
            return None;
        }
        entry.last_used = now;
        Some(entry.value.clone())
    }

    pub fn len(&self) -> usize {
        self.entries.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.read().is_empty()
    }
}

pub struct AppState {
    pub models: Store<QualityModel>,
    pub datasets: Store<StoredDataset>,
    token: Option<String>,
}

impl AppState {
    pub fn new(idle: Duration, token: Option<String>) -> Self {
        Self {
            models: Store::new("model", idle),
            datasets: Store::new("dataset", idle),
            token,
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/models", post(upload_model))
        .route("/models/{id}", get(get_model))
        .route("/datasets", post(upload_dataset))
        .route("/evaluate", post(evaluate_handler))
        .route("/whatif", post(what_if_handler))
        .route("/compare", post(compare_handler))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .merge(api)
        .with_state(state)
}

async fn require_token(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let given = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if given != Some(token.as_str()) {
            return ApiError::new(
                StatusCode::UNAUTHORIZED,
                "unauthorized",
                "missing or wrong bearer token",
            )
            .into_response();
        }
    }
    next.run(req).await
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

/// Parses and validates a model document.
pub fn load_model(text: &str) -> Result<QualityModel, ApiError> {
    let model = parse_model(text)?;
    let issues = validate_model(&model);
    if !issues.is_empty() {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "validation-failed",
            format!("model failed validation with {} issue(s)", issues.len()),
        )
        .with_details(ApiError::issues(&issues)));
    }
    Ok(model)
}

async fn upload_model(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let text = std::str::from_utf8(&body)
        .map_err(|_| ApiError::bad_request("model document is not UTF-8"))?;
    let model = load_model(text)?;
    let name = model.name.clone();
    let id = state.models.insert(model);
    Ok((
        StatusCode::CREATED,
        Json(json!({"modelId": id, "name": name})),
    )
        .into_response())
}

async fn get_model(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let model = state
        .models
        .get(&id)
        .ok_or_else(|| ApiError::not_found("model", &id))?;
    Ok((
        [(header::CONTENT_TYPE, "application/json")],
        serialize_model(&model),
    )
        .into_response())
}

/// `{format: "csv" | "json", content}`. JSON content may be given as text
/// or as the array itself.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetUpload {
    format: String,
    content: Value,
}

impl DatasetUpload {
    fn into_stored(self) -> Result<StoredDataset, ApiError> {
        let format: DatasetFormat = self.format.parse().map_err(ApiError::bad_request)?;
        let content = match self.content {
            Value::String(s) => s,
            other if format == DatasetFormat::Json => other.to_string(),
            _ => return Err(ApiError::bad_request("csv content must be a string")),
        };
        // catches id and syntax problems before any model is involved
        parse_dataset(&content, format, &DatasetSchema::new())?;
        Ok(StoredDataset { format, content })
    }
}

async fn upload_dataset(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let stored = parse_json::<DatasetUpload>(&body)?.into_stored()?;
    let count = parse_dataset(&stored.content, stored.format, &DatasetSchema::new())?.len();
    let id = state.datasets.insert(stored);
    Ok((
        StatusCode::CREATED,
        Json(json!({"datasetId": id, "alternatives": count})),
    )
        .into_response())
}

/// Shared request shape: a model and a dataset, each by id or inline.
#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct EngineRequest {
    model_id: Option<String>,
    /// Model document, as text or as the JSON object itself.
    model: Option<Value>,
    dataset_id: Option<String>,
    dataset: Option<DatasetUpload>,
    method: Option<Method>,
    methods: Option<Vec<Method>>,
    overrides: Option<Vec<WhatIfOverride>>,
}

impl EngineRequest {
    fn resolve(
        &mut self,
        state: &AppState,
    ) -> Result<(Arc<QualityModel>, Vec<Alternative>), ApiError> {
        let model = match (self.model_id.take(), self.model.take()) {
            (Some(id), None) => state
                .models
                .get(&id)
                .ok_or_else(|| ApiError::not_found("model", &id))?,
            (None, Some(Value::String(text))) => Arc::new(load_model(&text)?),
            (None, Some(doc)) => Arc::new(load_model(&doc.to_string())?),
            (Some(_), Some(_)) => {
                return Err(ApiError::bad_request(
                    "give either modelId or model, not both",
                ))
            }
            (None, None) => return Err(ApiError::bad_request("modelId or model is required")),
        };
        let dataset = match (self.dataset_id.take(), self.dataset.take()) {
            (Some(id), None) => state
                .datasets
                .get(&id)
                .ok_or_else(|| ApiError::not_found("dataset", &id))?,
            (None, Some(upload)) => Arc::new(upload.into_stored()?),
            (Some(_), Some(_)) => {
                return Err(ApiError::bad_request(
                    "give either datasetId or dataset, not both",
                ))
            }
            (None, None) => return Err(ApiError::bad_request("datasetId or dataset is required")),
        };
        let alternatives = parse_dataset(
            &dataset.content,
            dataset.format,
            &DatasetSchema::from_model(&model),
        )?;
        Ok((model, alternatives))
    }
}

/// Engine work runs off the async workers.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

async fn evaluate_handler(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let mut req: EngineRequest = parse_json(&body)?;
    let (model, alts) = req.resolve(&state)?;
    let method = req.method;
    let result = blocking(move || {
        let result = match method {
            Some(m) => evaluate(&apply_method(&model, m).0, &alts)?,
            None => evaluate(&model, &alts)?,
        };
        Ok(result)
    })
    .await?;
    Ok(Json(result).into_response())
}

async fn what_if_handler(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let mut req: EngineRequest = parse_json(&body)?;
    let (model, alts) = req.resolve(&state)?;
    let overrides = req.overrides.take().unwrap_or_default();
    let result = blocking(move || Ok(what_if(&model, &overrides, &alts)?)).await?;
    Ok(Json(result).into_response())
}

async fn compare_handler(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let mut req: EngineRequest = parse_json(&body)?;
    let (model, alts) = req.resolve(&state)?;
    let methods = match req.methods.take() {
        Some(m) if m.is_empty() => return Err(ApiError::bad_request("methods must not be empty")),
        Some(m) => m,
        None => Method::ALL.to_vec(),
    };
    let result = blocking(move || Ok(compare_methods(&model, &alts, &methods)?)).await?;
    Ok(Json(result).into_response())
}
