#![allow(dead_code)]

use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::{Body, Bytes};
use axum::http::{HeaderMap, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;
use translaw_core::clock::SteppingClock;
use translaw_core::gateway::ProviderRegistry;
use translaw_core::{Gateway, Memory, Pipeline};
use translaw_server::{router, AppOptions, AppState};

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: Bytes,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("not json ({e}): {}", self.text()))
    }

    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }
}

pub fn pipeline(memory: Memory) -> Pipeline {
    let gateway = Gateway::new(ProviderRegistry::seeded()).unwrap();
    Pipeline::new(Arc::new(gateway), Arc::new(Mutex::new(memory)))
        .unwrap()
        .with_clock(Arc::new(SteppingClock::fixed()))
}

pub fn app_with(pipeline: Pipeline, auto_start: bool) -> Router {
    router(AppState::new(pipeline, AppOptions { auto_start, corpus_dir: None }), None)
}

pub fn app(auto_start: bool) -> Router {
    app_with(pipeline(Memory::in_memory()), auto_start)
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>, headers: &[(&str, &str)]) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    for (k, v) in headers {
        req = req.header(*k, *v);
    }
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes();
    Reply { status, headers, body }
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    call(app, Method::GET, uri, None, &[]).await
}

pub async fn post(app: &Router, uri: &str, body: Value) -> Reply {
    call(app, Method::POST, uri, Some(body), &[]).await
}

pub fn mock_config() -> Value {
    serde_json::json!({
        "role_bindings": { "translator": "mock", "annotator": "mock", "proofreader": "mock" }
    })
}

/// Polls the job until `done` holds for its state, returning every state
/// observed along the way.
pub async fn poll_until(app: &Router, id: &str, done: impl Fn(&str) -> bool) -> (Value, Vec<String>) {
    let deadline = Instant::now() + Duration::from_secs(5);
    let mut seen = Vec::new();
    loop {
        let job = get(app, &format!("/jobs/{id}")).await.json();
        let state = job["state"].as_str().unwrap().to_string();
        if seen.last() != Some(&state) {
            seen.push(state.clone());
        }
        if done(&state) {
            return (job, seen);
        }
        assert!(Instant::now() < deadline, "job {id} stuck in {state}");
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
}
