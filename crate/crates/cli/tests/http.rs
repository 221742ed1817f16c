use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use qmcdm::api::{router, AppState, DEFAULT_IDLE_TIMEOUT};
use qmcdm_core::prettef;
use qmcdm_core::{
    apply_method, compare_methods, evaluate, parse_model, serialize_model, what_if,
    AggregationSpec, Method, SmarterAlgorithm, WhatIfOverride,
};
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    router(Arc::new(AppState::new(DEFAULT_IDLE_TIMEOUT, None)))
}

async fn send(
    app: &Router,
    method: &str,
    uri: &str,
    body: impl Into<Body>,
) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(body.into())
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    (status, bytes)
}

async fn send_json(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let (status, bytes) = send(app, "POST", uri, body.to_string()).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn upload(app: &Router) -> (String, String) {
    let (status, bytes) = send(app, "POST", "/models", prettef::TREND_SUBSET_DOCUMENT).await;
    assert_eq!(status, StatusCode::CREATED);
    let model: Value = serde_json::from_slice(&bytes).unwrap();
    let (status, data) = send_json(
        app,
        "/datasets",
        json!({"format": "csv", "content": prettef::ALTERNATIVES_CSV}),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(data["alternatives"], 17);
    (
        model["modelId"].as_str().unwrap().to_string(),
        data["datasetId"].as_str().unwrap().to_string(),
    )
}

fn bundled() -> (qmcdm_core::QualityModel, Vec<qmcdm_core::Alternative>) {
    let model = prettef::trend_subset_model();
    let alts = prettef::alternatives_for(&model);
    (model, alts)
}

#[tokio::test]
async fn healthz() {
    let (status, body) = send(&app(), "GET", "/healthz", Body::empty()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"ok");
}

#[tokio::test]
async fn model_upload_and_canonical_download() {
    let app = app();
    let (model_id, _) = upload(&app).await;
    let (status, body) = send(&app, "GET", &format!("/models/{model_id}"), Body::empty()).await;
    assert_eq!(status, StatusCode::OK);
    let canonical = serialize_model(&parse_model(prettef::TREND_SUBSET_DOCUMENT).unwrap());
    assert_eq!(String::from_utf8(body).unwrap(), canonical);
}

#[tokio::test]
async fn evaluate_matches_library() {
    let app = app();
    let (model_id, dataset_id) = upload(&app).await;
    let (model, alts) = bundled();

    let (status, body) = send_json(
        &app,
        "/evaluate",
        json!({"modelId": model_id, "datasetId": dataset_id}),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        body,
        serde_json::to_value(evaluate(&model, &alts).unwrap()).unwrap()
    );
    assert_eq!(body["ranking"][0]["id"], "Bootstrap");

    let (status, body) = send_json(
        &app,
        "/evaluate",
        json!({
            "model": prettef::TREND_SUBSET_DOCUMENT,
            "dataset": {"format": "csv", "content": prettef::ALTERNATIVES_CSV},
            "method": "ROC",
        }),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let roc = evaluate(&apply_method(&model, Method::Roc).0, &alts).unwrap();
    assert_eq!(body, serde_json::to_value(roc).unwrap());
}

#[tokio::test]
async fn inline_json_dataset_and_model_object() {
    let app = app();
    let doc: Value = serde_json::from_str(prettef::TREND_SUBSET_DOCUMENT).unwrap();
    let rows = json!([
        {"id": "a", "forks": 10, "pullRequests": 1},
        {"id": "b", "forks": 5, "pullRequests": 9},
    ]);
    let (status, body) = send_json(
        &app,
        "/evaluate",
        json!({"model": doc, "dataset": {"format": "json", "content": rows}}),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    // RR: a = 2/3 * 1 + 0, b = 0 + 1/3 * 1
    assert_eq!(body["ranking"][0]["id"], "a");
    assert!((body["ranking"][0]["utility"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
}

#[tokio::test]
async fn what_if_rank_swap() {
    let app = app();
    let (model_id, dataset_id) = upload(&app).await;
    let (model, alts) = bundled();
    let swap = json!([{
        "attributeId": "Trend",
        "replacement": {"kind": "SMARTER", "algorithm": "RR", "ranks": [2, 1]},
    }]);
    let (status, body) = send_json(
        &app,
        "/whatif",
        json!({"modelId": model_id, "datasetId": dataset_id, "overrides": swap}),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let overrides = [WhatIfOverride {
        attribute_id: "Trend".into(),
        replacement: AggregationSpec::Smarter {
            algorithm: SmarterAlgorithm::Rr,
            ranks: vec![2, 1],
        },
    }];
    let expected = what_if(&model, &overrides, &alts).unwrap();
    assert_eq!(body, serde_json::to_value(&expected).unwrap());
    // pull requests now dominate, so the argmax moves to the pull-request leader
    let baseline = evaluate(&model, &alts).unwrap();
    assert_eq!(baseline.ranking[0].id, "Bootstrap");
    assert_eq!(body["ranking"][0]["id"], "Rails");

    // no overrides is the baseline
    let (_, same) = send_json(
        &app,
        "/whatif",
        json!({"modelId": model_id, "datasetId": dataset_id, "overrides": []}),
    )
    .await;
    assert_eq!(same, serde_json::to_value(&baseline).unwrap());
}

#[tokio::test]
async fn what_if_rejections() {
    let app = app();
    let (model_id, dataset_id) = upload(&app).await;
    let leaf = json!([{"attributeId": "Forks", "replacement": {"kind": "SMARTS", "weights": [1]}}]);
    let (status, body) = send_json(
        &app,
        "/whatif",
        json!({"modelId": model_id, "datasetId": dataset_id, "overrides": leaf}),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "leaf-override");

    let short =
        json!([{"attributeId": "Trend", "replacement": {"kind": "SMARTS", "weights": [1, 2, 3]}}]);
    let (status, body) = send_json(
        &app,
        "/whatif",
        json!({"modelId": model_id, "datasetId": dataset_id, "overrides": short}),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "invalid-override");
    assert_eq!(body["details"][0]["rule"], "weight-count-mismatch");
}

#[tokio::test]
async fn compare_matches_library() {
    let app = app();
    let (model_id, dataset_id) = upload(&app).await;
    let (model, alts) = bundled();
    let (status, body) = send_json(
        &app,
        "/compare",
        json!({"modelId": model_id, "datasetId": dataset_id}),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let expected = compare_methods(&model, &alts, &Method::ALL).unwrap();
    assert_eq!(body, serde_json::to_value(&expected).unwrap());
    let tau = body["kendallTau"].as_array().unwrap();
    assert_eq!(tau.len(), 4);
    for (i, row) in tau.iter().enumerate() {
        assert_eq!(row[i], 0.0);
    }

    let (_, two) = send_json(
        &app,
        "/compare",
        json!({"modelId": model_id, "datasetId": dataset_id, "methods": ["RS", "SWING"]}),
    )
    .await;
    assert_eq!(two["rankings"].as_array().unwrap().len(), 2);
    let (status, _) = send_json(
        &app,
        "/compare",
        json!({"modelId": model_id, "datasetId": dataset_id, "methods": []}),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn error_envelopes() {
    let app = app();
    let (status, body) = send(&app, "POST", "/models", prettef::MODEL_DOCUMENT).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let body: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(body["code"], "validation-failed");
    assert!(body["details"]
        .as_array()
        .unwrap()
        .iter()
        .all(|d| d["rule"] == "empty-categorical"));

    let (status, body) = send(
        &app,
        "POST",
        "/models",
        "{\n  \"model\": {\n    \"name\": 3,\n",
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let body: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(body["code"], "model-syntax");
    assert!(body["details"][0]["line"].is_u64());

    let (status, body) = send(&app, "GET", "/models/model-99", Body::empty()).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let body: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(
        body,
        json!({"code": "not-found", "message": "no model with id `model-99`", "details": []})
    );

    let (status, body) = send(&app, "POST", "/evaluate", "{not json").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(
        serde_json::from_slice::<Value>(&body).unwrap()["code"],
        "bad-request"
    );

    let (status, body) = send_json(
        &app,
        "/datasets",
        json!({"format": "csv", "content": "name\nx\n"}),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "invalid-dataset");

    let (status, body) =
        send_json(&app, "/datasets", json!({"format": "xml", "content": ""})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "bad-request");

    // a dataset without the bound columns
    let (status, body) = send_json(
        &app,
        "/evaluate",
        json!({"model": prettef::TREND_SUBSET_DOCUMENT, "dataset": {"format": "csv", "content": "id\na\n"}}),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "missing-measurement");
}

#[tokio::test]
async fn bearer_token() {
    let app = router(Arc::new(AppState::new(
        DEFAULT_IDLE_TIMEOUT,
        Some("s3cret".into()),
    )));
    let (status, _) = send(&app, "GET", "/healthz", Body::empty()).await;
    assert_eq!(status, StatusCode::OK);
    let (status, body) = send(&app, "POST", "/models", prettef::TREND_SUBSET_DOCUMENT).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    assert_eq!(
        serde_json::from_slice::<Value>(&body).unwrap()["code"],
        "unauthorized"
    );
    let req = Request::builder()
        .method("POST")
        .uri("/models")
        .header(header::AUTHORIZATION, "Bearer s3cret")
        .body(Body::from(prettef::TREND_SUBSET_DOCUMENT))
        .unwrap();
    assert_eq!(
        app.oneshot(req).await.unwrap().status(),
        StatusCode::CREATED
    );
}

#[tokio::test]
async fn idle_uploads_expire() {
    let app = router(Arc::new(AppState::new(Duration::from_millis(50), None)));
    let (model_id, _) = upload(&app).await;
    tokio::time::sleep(Duration::from_millis(120)).await;
    let (status, _) = send(&app, "GET", &format!("/models/{model_id}"), Body::empty()).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_requests_agree() {
    let app = app();
    let (model_id, dataset_id) = upload(&app).await;
    let mut tasks = Vec::new();
    for _ in 0..16 {
        let app = app.clone();
        let body = json!({"modelId": model_id, "datasetId": dataset_id});
        tasks.push(tokio::spawn(async move {
            send_json(&app, "/evaluate", body).await
        }));
    }
    let mut bodies = Vec::new();
    for t in tasks {
        let (status, body) = t.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        bodies.push(body);
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
}
