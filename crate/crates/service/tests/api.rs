use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use disambig_core::harness::Task;
use disambig_core::llm::mock::ScriptedProvider;
use disambig_core::llm::Gateway;
use disambig_core::oracle::AnswerError;
use disambig_core::pool::Answer;
use disambig_core::session::{Clarifier, SessionConfig};
use disambig_core::synthetic::{synthetic_gateway, synthetic_tasks};
use disambig_service::{router, AppState, OracleMode, ServiceConfig};

fn app_with(config: ServiceConfig, seed: u64) -> AppState {
    AppState::new(Arc::new(move || synthetic_gateway(seed)), config)
}

fn app() -> AppState {
    app_with(ServiceConfig::default(), 3)
}

async fn call(state: &AppState, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = router(state.clone()).oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

fn intent(i: usize) -> String {
    synthetic_tasks()[i].ambiguous_prompt.clone()
}

async fn create(state: &AppState, body: Value) -> (StatusCode, Value) {
    call(state, "POST", "/sessions", Some(body)).await
}

#[tokio::test]
async fn create_returns_first_question() {
    let state = app();
    let (status, body) = create(&state, json!({"intent": intent(0), "budget_k": 3, "pool_size": 6})).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["state"], "awaiting_answer");
    assert!(body["first_question"]["text"].as_str().unwrap().ends_with('?'));
    assert_eq!(body["pool_stats"]["budget_k"], 3);
    assert!(body["final_spec"].is_null());
}

#[tokio::test]
async fn zero_budget_finalizes_immediately() {
    let state = app();
    let (status, body) = create(&state, json!({"intent": intent(1), "budget_k": 0})).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["state"], "finalized");
    assert!(body["first_question"].is_null());
    assert!(body["final_spec"]["resources"].is_object());
}

#[tokio::test]
async fn invalid_bodies_are_rejected() {
    let state = app();
    let (status, body) = create(&state, json!({"budget_k": 3})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"]["code"].is_string());
    assert!(body["error"]["message"].is_string());
    let (status, _) = create(&state, json!({"intent": "  "})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = create(&state, json!({"intent": "x", "pool_size": 0})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn dead_provider_is_503() {
    let state = AppState::new(
        Arc::new(|| Gateway::new(Arc::new(ScriptedProvider::new(vec![])))),
        ServiceConfig::default(),
    );
    let (status, body) = create(&state, json!({"intent": "anything"})).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(body["error"]["code"], "provider_unavailable");
}

#[tokio::test]
async fn answer_errors() {
    let state = app();
    let (status, _) = call(&state, "POST", "/sessions/nope/answer", Some(json!({"answer": "yes"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (_, created) = create(&state, json!({"intent": intent(0), "budget_k": 1})).await;
    let id = created["session_id"].as_str().unwrap();
    let uri = format!("/sessions/{id}/answer");
    let (status, _) = call(&state, "POST", &uri, Some(json!({"answer": "maybe"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&state, "POST", &uri, Some(json!({"answer": true}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, body) = call(&state, "POST", &uri, Some(json!({"answer": "no"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body["final_spec"].is_object());
    assert!(body["next_question"].is_null());
    assert_eq!(body["round_record"]["round"], 1);

    let (status, body) = call(&state, "POST", &uri, Some(json!({"answer": "yes"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["code"], "wrong_state");
}

#[tokio::test]
async fn trace_endpoint() {
    let state = app();
    let (_, created) = create(&state, json!({"intent": intent(2), "budget_k": 5})).await;
    let id = created["session_id"].as_str().unwrap();
    let (status, fresh) = call(&state, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(fresh["history"].as_array().unwrap().len(), 0);
    assert!(fresh["pool"][0].get("specs").is_none());

    for _ in 0..2 {
        call(&state, "POST", &format!("/sessions/{id}/answer"), Some(json!({"answer": "yes"}))).await;
    }
    let (_, after) = call(&state, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(after["history"].as_array().unwrap().len(), 2);
    assert_eq!(after["trace"].as_array().unwrap().len(), 2);

    let (_, full) = call(&state, "GET", &format!("/sessions/{id}?full=1"), None).await;
    assert!(full["pool"][0]["specs"].is_array());
    let (status, _) = call(&state, "GET", "/sessions/unknown", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn http_matches_in_process_run() {
    let answers = [Answer::Yes, Answer::No, Answer::No, Answer::Yes, Answer::No, Answer::Yes];
    for (i, task) in synthetic_tasks().iter().enumerate().take(4) {
        let seed = 10 + i as u64;
        let state = app_with(ServiceConfig::default(), seed);
        let (_, created) = create(&state, json!({"intent": task.ambiguous_prompt, "budget_k": 5, "pool_size": 8})).await;
        let id = created["session_id"].as_str().unwrap().to_string();
        let mut next = 0;
        let mut final_spec = created["final_spec"].clone();
        while final_spec.is_null() {
            let (_, body) =
                call(&state, "POST", &format!("/sessions/{id}/answer"), Some(json!({"answer": answers[next].to_string()})))
                    .await;
            next += 1;
            final_spec = body["final_spec"].clone();
        }
        let (_, remote) = call(&state, "GET", &format!("/sessions/{id}"), None).await;

        let clarifier = Clarifier::new(
            synthetic_gateway(seed),
            SessionConfig { budget_k: 5, pool_size: 8, ..Default::default() },
        );
        let counter = Mutex::new(0usize);
        let scripted = |_: Option<&disambig_core::Predicate>, _: &str| -> Result<Answer, AnswerError> {
            let mut n = counter.lock().unwrap();
            *n += 1;
            Ok(answers[*n - 1])
        };
        let t = Task { id: id.clone(), ..task.clone() };
        let (spec, session) = clarifier.run_session(&t, &scripted).unwrap();
        assert_eq!(final_spec, serde_json::to_value(&spec).unwrap(), "{}", task.id);
        assert_eq!(remote["trace"], serde_json::to_value(&session.trace).unwrap(), "{}", task.id);
        assert_eq!(remote["history"], serde_json::to_value(&session.history).unwrap(), "{}", task.id);
    }
}

#[tokio::test]
async fn sessions_are_isolated() {
    let state = app();
    let (_, a) = create(&state, json!({"intent": intent(0), "budget_k": 3})).await;
    let (_, b) = create(&state, json!({"intent": intent(0), "budget_k": 3})).await;
    let (a, b) = (a["session_id"].as_str().unwrap(), b["session_id"].as_str().unwrap());
    assert_ne!(a, b);
    let (_, before) = call(&state, "GET", &format!("/sessions/{b}"), None).await;
    call(&state, "POST", &format!("/sessions/{a}/answer"), Some(json!({"answer": "yes"}))).await;
    let (_, after) = call(&state, "GET", &format!("/sessions/{b}"), None).await;
    assert_eq!(before, after);
}

#[tokio::test]
async fn rule_mode_auto_answers_with_reference() {
    let config = ServiceConfig { oracle_mode: OracleMode::Rule, ..Default::default() };
    let state = app_with(config, 5);
    let task = &synthetic_tasks()[0];
    let body = json!({"intent": task.ambiguous_prompt, "budget_k": 4, "reference_spec": task.reference_spec});
    let (status, created) = create(&state, body).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(created["state"], "finalized");
    let id = created["session_id"].as_str().unwrap();
    let (_, got) = call(&state, "GET", &format!("/sessions/{id}"), None).await;
    assert!(!got["history"].as_array().unwrap().is_empty());

    // without a reference the session stays interactive
    let (_, created) = create(&state, json!({"intent": task.ambiguous_prompt, "budget_k": 4})).await;
    assert_eq!(created["state"], "awaiting_answer");
}

#[tokio::test]
async fn idle_sessions_expire() {
    let config = ServiceConfig { ttl: Duration::from_millis(20), ..Default::default() };
    let state = app_with(config, 1);
    let (_, created) = create(&state, json!({"intent": intent(3), "budget_k": 2})).await;
    let id = created["session_id"].as_str().unwrap();
    tokio::time::sleep(Duration::from_millis(40)).await;
    let (status, _) = call(&state, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(state.session_count().await, 0);
}

#[tokio::test]
async fn health_and_cors() {
    let state = app();
    let (status, body) = call(&state, "GET", "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/sessions")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let resp = router(state).oneshot(req).await.unwrap();
    assert!(resp.headers().contains_key("access-control-allow-origin"));
}
