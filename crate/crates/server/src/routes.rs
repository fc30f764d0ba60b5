use std::path::Path;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;
use translaw_core::pipeline::{export_json, export_txt};
use translaw_core::Credentials;

use crate::state::{AppState, CreateJob, JobView};
use crate::ApiError;

pub const PROVIDER_KEY_HEADER: &str = "x-provider-key";

pub fn router(state: AppState, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/jobs", post(create_job).get(list_jobs))
        .route("/jobs/{id}", get(get_job))
        .route("/jobs/{id}/start", post(start_job))
        .route("/jobs/{id}/annotations", post(submit_annotations))
        .route("/jobs/{id}/result", get(get_result))
        .route("/codes", get(list_codes))
        .route("/providers", get(list_providers))
        .route("/glossaries", get(list_glossaries))
        .route("/glossaries/{name}/matches", get(glossary_matches))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Session keys from every `X-Provider-Key: <provider>=<secret>` header.
fn credentials(headers: &HeaderMap) -> Result<Credentials, ApiError> {
    let mut creds = Credentials::default();
    for value in headers.get_all(PROVIDER_KEY_HEADER) {
        let text = value.to_str().map_err(|_| ApiError::bad_request("X-Provider-Key is not valid text"))?;
        creds.insert_header(text).map_err(|e| ApiError::bad_request(format!("X-Provider-Key: {e}")))?;
    }
    Ok(creds)
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

async fn create_job(State(state): State<AppState>, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let request: CreateJob = parse_body(&body)?;
    let summary = state.create_job(request, credentials(&headers)?)?;
    let location = format!("/jobs/{}", summary.job_id);
    Ok((StatusCode::CREATED, [(header::LOCATION, location)], Json(summary)).into_response())
}

async fn list_jobs(State(state): State<AppState>) -> impl IntoResponse {
    Json(state.summaries())
}

async fn get_job(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let job = state.slot(&id)?.view();
    Ok(Json(JobView::new(&job, state.pipeline().gateway().registry())).into_response())
}

async fn start_job(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let summary = state.start(&id, credentials(&headers)?)?;
    Ok((StatusCode::ACCEPTED, Json(summary)).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationSubmission {
    paragraph_index: Option<usize>,
    #[serde(default)]
    records: String,
    #[serde(default)]
    round_complete: bool,
}

#[derive(Debug, Serialize)]
struct AnnotationReceipt {
    accepted: usize,
    #[serde(flatten)]
    job: crate::JobSummary,
}

async fn submit_annotations(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<AnnotationReceipt>, ApiError> {
    let sub: AnnotationSubmission = parse_body(&body)?;
    let (accepted, job) =
        state.submit_annotations(&id, sub.paragraph_index, &sub.records, sub.round_complete, credentials(&headers)?)?;
    Ok(Json(AnnotationReceipt { accepted, job }))
}

#[derive(Debug, Deserialize)]
struct ResultQuery {
    format: Option<String>,
}

async fn get_result(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<ResultQuery>,
) -> Result<Response, ApiError> {
    let job = state.slot(&id)?.view();
    match q.format.as_deref().unwrap_or("json") {
        "json" => {
            let body = export_json(&job, state.pipeline().gateway().registry())?;
            Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
        }
        "txt" => Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], export_txt(&job)?).into_response()),
        other => Err(ApiError::bad_request(format!("unknown format `{other}` (use json or txt)"))),
    }
}

async fn list_codes(State(state): State<AppState>) -> impl IntoResponse {
    Json(state.pipeline().taxonomy().codes().to_vec())
}

async fn list_providers(State(state): State<AppState>) -> impl IntoResponse {
    Json(state.pipeline().gateway().registry().summaries())
}

async fn list_glossaries(State(state): State<AppState>) -> impl IntoResponse {
    let p = state.pipeline();
    let list: Vec<_> = p
        .glossary_names()
        .map(|name| json!({ "name": name, "entries": p.glossary(name).map_or(0, |g| g.len()) }))
        .collect();
    Json(list)
}

#[derive(Debug, Deserialize)]
struct MatchQuery {
    text: String,
}

async fn glossary_matches(
    State(state): State<AppState>,
    UrlPath(name): UrlPath<String>,
    Query(q): Query<MatchQuery>,
) -> Result<Response, ApiError> {
    let glossary = state.pipeline().glossary(&name).ok_or_else(|| ApiError::not_found(format!("no glossary `{name}`")))?;
    Ok(Json(glossary.match_terms(&q.text)).into_response())
}
