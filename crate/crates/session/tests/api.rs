mod common;

use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use bci_core::langmodel::{LanguageStore, Smoothing};
use bci_session::calibrate::gaze_trial;
use bci_session::{replay, router, Service, ServiceConfig};
use futures::StreamExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app_with(config: ServiceConfig) -> Router {
    let store = Arc::new(LanguageStore::bundled(3, Smoothing::Laplace).unwrap());
    let service = Service::new(config, common::mock(), Some(common::model()), store).unwrap();
    router(Arc::new(service))
}

fn app() -> Router {
    app_with(ServiceConfig::default())
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = to_bytes(res.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn new_session(app: &Router) -> String {
    let (status, v) = call(app, "POST", "/api/session", Some(json!({"language": "en"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    v["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn spell_choose_and_read_back() {
    let app = app();
    let id = new_session(&app).await;
    let (status, v) = call(&app, "GET", &format!("/api/session/{id}/paradigm"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND, "{v}");

    let (status, v) = call(
        &app,
        "POST",
        &format!("/api/session/{id}/spell"),
        Some(json!({"text": "turn on the light"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["state"]["phase"], "paradigm_active");
    let kinds: Vec<&str> = v["outcome"]["events"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["kind"].as_str().unwrap())
        .collect();
    assert_eq!(kinds, ["spelled", "llm_request", "llm_response", "paradigm_updated"]);

    let (status, p) = call(&app, "GET", &format!("/api/session/{id}/paradigm"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(p["blocks"]
        .as_array()
        .unwrap()
        .iter()
        .any(|b| b["action"] == "$Lamp (living room, 1)"));

    let (status, v) = call(
        &app,
        "POST",
        &format!("/api/session/{id}/choose"),
        Some(json!({"block_id": "living-room-light:on"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let (_, d) = call(&app, "GET", &format!("/api/devices?session={id}"), None).await;
    let lamp = d["devices"]
        .as_array()
        .unwrap()
        .iter()
        .find(|x| x["name"] == "living room light")
        .unwrap();
    assert_eq!(lamp["state"]["power"], "on");
    let (_, latest) = call(&app, "GET", "/api/devices", None).await;
    assert_eq!(latest["session_id"], id.as_str());

    let (status, _) = call(
        &app,
        "POST",
        &format!("/api/session/{id}/choose"),
        Some(json!({"block_id": "nope"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(
        &app,
        "POST",
        &format!("/api/session/{id}/spell"),
        Some(json!({"text": "x"})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call(&app, "GET", "/api/session/missing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn gaze_trial_over_http() {
    let app = app();
    let id = new_session(&app).await;
    call(
        &app,
        "POST",
        &format!("/api/session/{id}/spell"),
        Some(json!({"text": "turn on the light"})),
    )
    .await;
    let (_, p) = call(&app, "GET", &format!("/api/session/{id}/paradigm"), None).await;
    let block = p["blocks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|b| b["block_id"] == "bedroom-light:on")
        .unwrap();
    let trial = gaze_trial(&common::model(), block["freq_hz"].as_f64().unwrap(), 20.0, 9).unwrap();
    let body: Value = serde_json::from_str(&trial.to_json()).unwrap();
    let (status, v) = call(&app, "POST", &format!("/api/session/{id}/gaze"), Some(body.clone())).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["outcome"]["events"][0]["payload"]["block_id"], "bedroom-light:on");
    assert_eq!(v["outcome"]["events"][1]["kind"], "instruction_executed");

    let mut bad = body;
    bad["samples"].as_array_mut().unwrap().pop();
    bad["n_channels"] = json!(7);
    let (status, _) = call(&app, "POST", &format!("/api/session/{id}/gaze"), Some(bad)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn suggestions_and_detection() {
    let app = app();
    let (status, v) = call(&app, "GET", "/api/lm/suggest?ctx=please%20turn%20of&lang=en&k=3", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["suggestions"][0], "off");
    assert!(v["suggestions"].as_array().unwrap().len() <= 3);

    let (_, v) = call(&app, "GET", "/api/lm/suggest?ctx=turn%20on%20the%20&lang=en&k=5", None).await;
    assert!(!v["suggestions"].as_array().unwrap().is_empty());
    assert!(v["detection"].is_null());

    let (_, v) = call(
        &app,
        "GET",
        "/api/lm/suggest?ctx=%E6%89%93%E5%BC%80%E5%AE%A2%E5%8E%85%E7%9A%84%E7%81%AF&k=5",
        None,
    )
    .await;
    assert_eq!(v["language"], "zh");
    assert_eq!(v["detection"]["language"], "zh");

    let (_, v) = call(&app, "GET", "/api/lm/suggest?ctx=&lang=&k=5", None).await;
    assert_eq!(v["suggestions"], json!([]));
    let (status, _) = call(&app, "GET", "/api/lm/suggest?ctx=hola&lang=tlh&k=5", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (_, v) = call(
        &app,
        "GET",
        "/api/lm/detect?text=Bonjour%20tout%20le%20monde%2C%20allume%20la%20lumi%C3%A8re",
        None,
    )
    .await;
    assert_eq!(v["language"], "fr");
}

#[tokio::test]
async fn event_stream_replays_backlog_then_live_events() {
    let app = app();
    let id = new_session(&app).await;
    call(
        &app,
        "POST",
        &format!("/api/session/{id}/spell"),
        Some(json!({"text": "turn on the light"})),
    )
    .await;
    let req = Request::get(format!("/api/session/{id}/events?after=1"))
        .body(Body::empty())
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    assert_eq!(res.headers()["content-type"], "text/event-stream");
    let mut body = res.into_body().into_data_stream();
    call(
        &app,
        "POST",
        &format!("/api/session/{id}/choose"),
        Some(json!({"block_id": "living-room-light:on"})),
    )
    .await;

    let mut text = String::new();
    while text.matches("\n\n").count() < 6 {
        let chunk = tokio::time::timeout(std::time::Duration::from_secs(5), body.next())
            .await
            .expect("stream stalls")
            .unwrap()
            .unwrap();
        text.push_str(std::str::from_utf8(&chunk).unwrap());
    }
    let ids: Vec<u64> = text
        .lines()
        .filter_map(|l| l.strip_prefix("id: ").or_else(|| l.strip_prefix("id:")))
        .map(|s| s.trim().parse().unwrap())
        .collect();
    assert_eq!(ids, [2, 3, 4, 5, 6, 7]);
    assert!(text.contains("event: instruction_executed") || text.contains("event:instruction_executed"));
}

#[tokio::test]
async fn sessions_write_replayable_logs() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_with(ServiceConfig {
        log_dir: Some(dir.path().to_path_buf()),
        synthesize_gaze_snr_db: Some(20.0),
        ..ServiceConfig::default()
    });
    let id = new_session(&app).await;
    call(
        &app,
        "POST",
        &format!("/api/session/{id}/spell"),
        Some(json!({"text": "turn on the light"})),
    )
    .await;
    call(
        &app,
        "POST",
        &format!("/api/session/{id}/choose"),
        Some(json!({"block_id": "living-room-light:on"})),
    )
    .await;
    call(&app, "POST", &format!("/api/session/{id}/reset"), None).await;
    let (_, live) = call(&app, "GET", &format!("/api/session/{id}"), None).await;
    let state = replay(dir.path().join(format!("{id}.jsonl"))).unwrap();
    let replayed = serde_json::to_value(bci_session::SessionView::from(&state)).unwrap();
    assert_eq!(live, replayed);
    assert_eq!(live["phase"], "spelling");
}

#[test]
fn config_file_round_trip_and_rejections() {
    let cfg = ServiceConfig::from_json(
        r#"{"acquisition": {"n_channels": 8, "sample_rate_hz": 250.0, "epoch_len_samples": 250},
            "band_hz": [8.0, 15.8], "threshold": 0.1,
            "gateway": {"endpoint": null, "timeout_ms": 5000}}"#,
    )
    .unwrap();
    assert_eq!(cfg.threshold, 0.1);
    assert_eq!(cfg.gateway.timeout_ms, 5000);
    assert_eq!(cfg.settings().margin_threshold, 0.1);
    let back = ServiceConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(back, cfg);
    for bad in [
        r#"{"thresold": 0.1}"#,
        r#"{"band_hz": [15.8, 8.0]}"#,
        r#"{"threshold": -1}"#,
        r#"{"acquisition": {"n_channels": 0, "sample_rate_hz": 250.0, "epoch_len_samples": 250}}"#,
    ] {
        assert!(ServiceConfig::from_json(bad).is_err(), "{bad}");
    }
    // A model calibrated for another montage is refused at startup.
    let store = Arc::new(LanguageStore::new());
    let cfg = ServiceConfig {
        acquisition: bci_core::signal::AcquisitionConfig::new(4, 250.0, 250).unwrap(),
        ..ServiceConfig::default()
    };
    assert!(Service::new(cfg, common::mock(), Some(common::model()), store).is_err());
}
