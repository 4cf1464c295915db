mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

fn app(dir: &std::path::Path) -> Router {
    let (engine, _) = common::engine(dir);
    selex::http::router(Arc::new(engine))
}

fn ratings(value: u8) -> Value {
    json!({
        "ratings": {
            "mental_demand": value, "success": 4, "negative_emotion": 2, "helpfulness": 4,
            "ease": 3, "confidence": 4, "understanding": 5
        },
        "demographics": {"age_band": "25-34"}
    })
}

#[tokio::test]
async fn control_session_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());

    let (status, view) = call(&app, Method::POST, "/sessions", Some(json!({"condition": "control"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(view["phase"], "consent");
    assert_eq!(view["task_total"], 20);
    let id = view["session_id"].as_str().unwrap().to_string();

    let (status, err) = call(&app, Method::GET, &format!("/sessions/{id}/next"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"], "wrong_phase");

    let (status, view) = call(&app, Method::POST, &format!("/sessions/{id}/consent"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["phase"], "task");

    let (status, _) = call(&app, Method::POST, &format!("/sessions/{id}/consent"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);

    for i in 0..20 {
        let (status, item) = call(&app, Method::GET, &format!("/sessions/{id}/next"), None).await;
        assert_eq!(status, StatusCode::OK);
        let (_, again) = call(&app, Method::GET, &format!("/sessions/{id}/next"), None).await;
        assert_eq!(item, again, "next is idempotent");
        assert_eq!(item["index"], i);
        assert_eq!(item["rendering"]["mode"], "original");
        assert!(item.get("elicitation").is_none());
        let doc = item["doc_id"].as_str().unwrap().to_string();
        let label = item["ai_prediction"]["label"].clone();
        let (status, resp) = call(&app, Method::POST, &format!("/sessions/{id}/decision"), Some(json!({"doc_id": doc, "label": label}))).await;
        assert_eq!(status, StatusCode::OK, "{resp}");
        assert_eq!(resp["decision"]["human_label"], label);
        let (status, err) = call(&app, Method::POST, &format!("/sessions/{id}/decision"), Some(json!({"doc_id": doc, "label": label}))).await;
        assert_eq!(status, StatusCode::CONFLICT);
        assert!(err["error"] == "duplicate" || err["error"] == "wrong_phase");
    }

    let (_, view) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(view["phase"], "survey");
    assert_eq!(view["decisions"], 20);

    let (status, err) = call(&app, Method::POST, &format!("/sessions/{id}/survey"), Some(ratings(9))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["error"], "invalid_rating");

    let (status, view) = call(&app, Method::POST, &format!("/sessions/{id}/survey"), Some(ratings(2))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["phase"], "done");

    let (status, _) = call(&app, Method::GET, &format!("/sessions/{id}/next"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, bundle) = call(&app, Method::GET, "/export", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(bundle["decisions_csv"].as_str().unwrap().lines().count(), 21);
    let surveys = bundle["surveys_csv"].as_str().unwrap();
    assert_eq!(surveys.lines().count(), 2);
    assert!(surveys.contains("age_band"));
}

#[tokio::test]
async fn rejections_have_stable_codes() {
    let dir = tempfile::tempdir().unwrap();
    let engine = Arc::new(common::engine(dir.path()).0);
    let app = selex::http::router(engine.clone());

    let (status, err) = call(&app, Method::GET, "/sessions/s9999", None).await;
    assert_eq!((status, err["error"].as_str()), (StatusCode::NOT_FOUND, Some("unknown_session")));

    let (status, err) = call(&app, Method::POST, "/sessions", Some(json!({"condition": "bogus"}))).await;
    assert_eq!((status, err["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("unknown_condition")));

    let (status, err) = call(&app, Method::POST, "/sessions", Some(json!({"condition": "panel_selective"}))).await;
    assert_eq!((status, err["error"].as_str()), (StatusCode::CONFLICT, Some("panel_unavailable")));

    let (_, view) = call(&app, Method::POST, "/sessions", Some(json!({"condition": "control:random"}))).await;
    assert_eq!(view["condition"], "control:random");
    let id = view["session_id"].as_str().unwrap().to_string();

    let (status, err) = call(&app, Method::POST, &format!("/sessions/{id}/decision"), Some(json!({"doc_id": "nope", "label": "positive"}))).await;
    assert_eq!((status, err["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("unknown_doc")));

    call(&app, Method::POST, &format!("/sessions/{id}/consent"), None).await;
    let (status, err) = call(&app, Method::POST, &format!("/sessions/{id}/input"), Some(json!({"doc_id": "x", "records": []}))).await;
    assert_eq!((status, err["error"].as_str()), (StatusCode::CONFLICT, Some("wrong_phase")));

    let (status, err) = call(&app, Method::POST, &format!("/sessions/{id}/survey"), Some(ratings(3))).await;
    assert_eq!((status, err["error"].as_str()), (StatusCode::CONFLICT, Some("wrong_phase")));

    // a test review that is not in this session's task list
    let tasks = engine.session(&id).unwrap().task_review_ids;
    let outsider = common::data().test_explanations.keys().find(|d| !tasks.contains(d)).unwrap().clone();
    let (status, err) = call(&app, Method::POST, &format!("/sessions/{id}/decision"), Some(json!({"doc_id": outsider, "label": "positive"}))).await;
    assert_eq!((status, err["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("unknown_doc")));

    let (status, err) = call(&app, Method::POST, &format!("/sessions/{id}/decision"), Some(json!({"doc_id": 3}))).await;
    assert!(status.is_client_error());
    assert_eq!(err["error"], "invalid_body");
    let (status, err) = call(&app, Method::POST, "/sessions", Some(json!({"condition": 5}))).await;
    assert!(status.is_client_error());
    assert_eq!(err["error"], "invalid_body");
}

#[tokio::test]
async fn critique_input_is_validated_and_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (_, view) = call(&app, Method::POST, "/sessions", Some(json!({"condition": "critique"}))).await;
    let id = view["session_id"].as_str().unwrap().to_string();
    let (_, view) = call(&app, Method::POST, &format!("/sessions/{id}/consent"), None).await;
    assert_eq!(view["phase"], "input");
    assert_eq!(view["input_total"], 10);

    let data = common::data();
    let order = data.input_sample.doc_ids.clone();
    for (i, doc) in order.iter().enumerate() {
        let (_, item) = call(&app, Method::GET, &format!("/sessions/{id}/next"), None).await;
        assert_eq!(item["doc_id"], doc.as_str());
        assert_eq!(item["elicitation"], "critique");
        let keywords: Vec<String> = serde_json::from_value(item["keywords"].clone()).unwrap();
        assert_eq!(keywords, data.dev_explanations[doc].keywords().map(String::from).collect::<Vec<_>>());

        if i + 1 < order.len() {
            let later = &order[i + 1];
            let answers: Vec<Value> = data.dev_explanations[later].keywords().map(|k| json!({"word": k, "signal": "agree"})).collect();
            let (status, err) = call(&app, Method::POST, &format!("/sessions/{id}/input"), Some(json!({"doc_id": later, "records": answers}))).await;
            assert_eq!((status, err["error"].as_str()), (StatusCode::CONFLICT, Some("out_of_order")));
        }
        let partial: Vec<Value> = keywords.iter().skip(1).map(|k| json!({"word": k, "signal": "agree"})).collect();
        let (status, err) = call(&app, Method::POST, &format!("/sessions/{id}/input"), Some(json!({"doc_id": doc, "records": partial}))).await;
        assert_eq!((status, err["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("invalid_input")));

        let selected = json!([{"word": keywords[0], "signal": "selected"}]);
        let (status, _) = call(&app, Method::POST, &format!("/sessions/{id}/input"), Some(json!({"doc_id": doc, "records": selected}))).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

        let full: Vec<Value> = keywords
            .iter()
            .enumerate()
            .map(|(j, k)| json!({"word": k, "signal": if j % 2 == 0 { "agree" } else { "disagree" }}))
            .collect();
        let (status, view) = call(&app, Method::POST, &format!("/sessions/{id}/input"), Some(json!({"doc_id": doc, "records": full}))).await;
        assert_eq!(status, StatusCode::OK, "{view}");

        let (status, err) = call(&app, Method::POST, &format!("/sessions/{id}/input"), Some(json!({"doc_id": doc, "records": full}))).await;
        assert_eq!(status, StatusCode::CONFLICT, "{err}");
    }
    let (_, view) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(view["phase"], "task");
    let (_, item) = call(&app, Method::GET, &format!("/sessions/{id}/next"), None).await;
    assert_eq!(item["rendering"]["mode"], "selective");

    // critique input now exists, so a panel session can start
    let (status, view) = call(&app, Method::POST, "/sessions", Some(json!({"condition": "panel"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(view["condition"], "panel_selective:fixed");
}

#[tokio::test]
async fn open_ended_words_must_occur_in_the_review() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (_, view) = call(&app, Method::POST, "/sessions", Some(json!({"condition": "open_ended"}))).await;
    let id = view["session_id"].as_str().unwrap().to_string();
    call(&app, Method::POST, &format!("/sessions/{id}/consent"), None).await;
    let (_, item) = call(&app, Method::GET, &format!("/sessions/{id}/next"), None).await;
    assert_eq!(item["elicitation"], "open_ended");
    assert!(item.get("keywords").is_none());
    let doc = item["doc_id"].as_str().unwrap();
    assert!(item["rendering"]["tokens"].as_array().unwrap().iter().all(|t| t["state"] == "plain"));

    let (status, err) = call(&app, Method::POST, &format!("/sessions/{id}/input"), Some(json!({"doc_id": doc, "records": [{"word": "zzzz", "signal": "selected"}]}))).await;
    assert_eq!((status, err["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("invalid_input")));

    let word = common::data().reviews[doc].tokens[0].word.clone();
    let dup = json!([{"word": word, "signal": "selected"}, {"word": word, "signal": "selected"}]);
    let (status, _) = call(&app, Method::POST, &format!("/sessions/{id}/input"), Some(json!({"doc_id": doc, "records": dup}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    // selecting nothing is allowed
    let (status, view) = call(&app, Method::POST, &format!("/sessions/{id}/input"), Some(json!({"doc_id": doc, "records": []}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["input_done"], 1);
}

#[tokio::test]
async fn default_assignment_cycles_through_the_roster() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let mut seen = Vec::new();
    for _ in 0..4 {
        let (status, view) = call(&app, Method::POST, "/sessions", None).await;
        assert_eq!(status, StatusCode::CREATED);
        seen.push(view["condition"].as_str().unwrap().to_string());
    }
    // an explicit request does not advance the cycle
    call(&app, Method::POST, "/sessions", Some(json!({"condition": "critique"}))).await;
    let (_, view) = call(&app, Method::POST, "/sessions", Some(json!({}))).await;
    seen.push(view["condition"].as_str().unwrap().to_string());
    assert_eq!(seen, ["control:fixed", "open_ended:fixed", "critique:fixed", "control:fixed", "open_ended:fixed"]);
}

#[tokio::test]
async fn survey_schema_lists_seven_items() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (status, items) = call(&app, Method::GET, "/survey", None).await;
    assert_eq!(status, StatusCode::OK);
    let items = items.as_array().unwrap();
    assert_eq!(items.len(), 7);
    assert!(items.iter().all(|i| i["text"].as_str().is_some_and(|t| !t.is_empty())));
}
