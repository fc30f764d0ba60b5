mod common;

use axum::http::{Method, StatusCode};
use common::*;
use serde_json::json;

const ORDER: [&str; 7] =
    ["Pending", "Translating", "Annotating", "AwaitingHumanAnnotation", "Proofreading", "Complete", "Failed"];

#[tokio::test(flavor = "multi_thread")]
async fn create_returns_pending_summary_with_location() {
    let app = app(false);
    let r = post(&app, "/jobs", json!({ "config": mock_config(), "text": "One.\n\nTwo." })).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
    let body = r.json();
    assert_eq!(body["state"], "Pending");
    assert_eq!(body["paragraph_count"], 2);
    assert_eq!(r.headers["location"], format!("/jobs/{}", body["job_id"].as_str().unwrap()));

    let view = get(&app, r.headers["location"].to_str().unwrap()).await.json();
    assert_eq!(view["state"], "Pending");
    assert!(view["paragraphs"].as_array().unwrap().iter().all(|p| p["draft"].is_null()));
}

#[tokio::test(flavor = "multi_thread")]
async fn invalid_configs_name_the_field() {
    let app = app(false);
    let mut cfg = mock_config();
    cfg["role_bindings"]["translator"] = json!("no-such-model");
    let r = post(&app, "/jobs", json!({ "config": cfg, "text": "One." })).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["fields"][0]["field"], "role_bindings.translator");

    let mut cfg = mock_config();
    cfg["rounds"] = json!(9);
    let r = post(&app, "/jobs", json!({ "config": cfg, "text": "One." })).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["fields"][0]["field"], "rounds");

    let r = post(&app, "/jobs", json!({ "config": mock_config(), "text": "  \n\n " })).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);

    let r = call(&app, Method::POST, "/jobs", None, &[("content-type", "application/json")]).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let r = post(&app, "/jobs", json!({ "config": mock_config() })).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread")]
async fn unknown_ids_are_404() {
    let app = app(false);
    assert_eq!(get(&app, "/jobs/job-99").await.status, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/jobs/job-99/result").await.status, StatusCode::NOT_FOUND);
    assert_eq!(post(&app, "/jobs/job-99/annotations", json!({})).await.status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn mock_job_completes_and_downloads() {
    let app = app(true);
    let id = post(&app, "/jobs", json!({ "config": mock_config(), "text": "First.\n\nSecond." })).await.json()["job_id"]
        .as_str()
        .unwrap()
        .to_string();
    let (job, seen) = poll_until(&app, &id, |s| s == "Complete" || s == "Failed").await;
    assert_eq!(job["state"], "Complete", "{job}");
    let positions: Vec<usize> = seen.iter().map(|s| ORDER.iter().position(|o| o == s).unwrap()).collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]), "{seen:?}");
    for p in job["paragraphs"].as_array().unwrap() {
        assert!(p["final"].is_string());
    }

    let txt = get(&app, &format!("/jobs/{id}/result?format=txt")).await;
    assert_eq!(txt.status, StatusCode::OK);
    assert_eq!(txt.text(), "【譯】First.\n\n【譯】Second.");
    let json = get(&app, &format!("/jobs/{id}/result")).await.json();
    assert_eq!(json["paragraphs"].as_array().unwrap().len(), 2);
    assert!(json["cost"]["total"].is_number());
    assert_eq!(get(&app, &format!("/jobs/{id}/result?format=pdf")).await.status, StatusCode::BAD_REQUEST);

    let list = get(&app, "/jobs").await.json();
    assert_eq!(list[0]["job_id"], id.as_str());
}

#[tokio::test(flavor = "multi_thread")]
async fn result_before_completion_conflicts() {
    let app = app(false);
    let id = post(&app, "/jobs", json!({ "config": mock_config(), "text": "A." })).await.json()["job_id"].clone();
    let r = get(&app, &format!("/jobs/{}/result?format=txt", id.as_str().unwrap())).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
}

#[tokio::test(flavor = "multi_thread")]
async fn manual_start() {
    let app = app(false);
    let id = post(&app, "/jobs", json!({ "config": mock_config(), "text": "A." })).await.json()["job_id"]
        .as_str()
        .unwrap()
        .to_string();
    assert_eq!(post(&app, &format!("/jobs/{id}/start"), json!({})).await.status, StatusCode::ACCEPTED);
    poll_until(&app, &id, |s| s == "Complete").await;
    assert_eq!(post(&app, &format!("/jobs/{id}/start"), json!({})).await.status, StatusCode::CONFLICT);
}

#[tokio::test(flavor = "multi_thread")]
async fn human_annotation_round() {
    let app = app(true);
    let mut cfg = mock_config();
    cfg["human_annotation"] = json!(true);
    let id = post(&app, "/jobs", json!({ "config": cfg, "text": "Alpha.\n\nBeta." })).await.json()["job_id"]
        .as_str()
        .unwrap()
        .to_string();
    poll_until(&app, &id, |s| s == "AwaitingHumanAnnotation").await;
    let uri = format!("/jobs/{id}/annotations");

    let bad = post(&app, &uri, json!({ "paragraph_index": 0, "records": "ERR: \"Alpha\" | ZZ | x | " })).await;
    assert_eq!(bad.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(bad.json()["error"].as_str().unwrap().contains("ZZ"));
    assert_eq!(bad.json()["line"], 1);

    let ok = post(&app, &uri, json!({ "paragraph_index": 0, "records": "ERR: \"【譯】\" | CW | 〔譯〕 | " })).await;
    assert_eq!(ok.status, StatusCode::OK, "{}", ok.text());
    assert_eq!(ok.json()["accepted"], 1);
    assert_eq!(ok.json()["state"], "AwaitingHumanAnnotation");

    let finish = post(&app, &uri, json!({ "paragraph_index": 1, "records": "", "round_complete": true })).await;
    assert_eq!(finish.status, StatusCode::OK);
    let (job, _) = poll_until(&app, &id, |s| s == "Complete").await;
    assert_eq!(job["paragraphs"][0]["final"], "〔譯〕Alpha.");
    assert_eq!(job["paragraphs"][1]["final"], "【譯】Beta.");

    let late = post(&app, &uri, json!({ "paragraph_index": 0, "records": "" })).await;
    assert_eq!(late.status, StatusCode::CONFLICT);
}

#[tokio::test(flavor = "multi_thread")]
async fn lookups_hide_secrets() {
    let app = app(true);
    let codes = get(&app, "/codes").await.json();
    assert_eq!(codes.as_array().unwrap().len(), 31);
    assert_eq!(codes[0]["category"], "Accuracy");

    let providers = get(&app, "/providers").await.text();
    assert!(providers.contains("\"mock\""));
    assert!(!providers.contains("OPENAI_API_KEY"));

    let r = call(
        &app,
        Method::POST,
        "/jobs",
        Some(json!({ "config": mock_config(), "text": "A." })),
        &[("x-provider-key", "gpt-4o=sk-very-secret")],
    )
    .await;
    let id = r.json()["job_id"].as_str().unwrap().to_string();
    let (_, _) = poll_until(&app, &id, |s| s == "Complete").await;
    for uri in [format!("/jobs/{id}"), format!("/jobs/{id}/result"), "/jobs".into()] {
        assert!(!get(&app, &uri).await.text().contains("sk-very-secret"), "{uri}");
    }
    let bad = call(&app, Method::POST, "/jobs", Some(json!({ "config": mock_config(), "text": "A." })), &[("x-provider-key", "garbage")]).await;
    assert_eq!(bad.status, StatusCode::BAD_REQUEST);
}
