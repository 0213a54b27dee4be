//! Loopback JSON API for the operator: alerts, rules, contexts, config and a
//! full state snapshot. Every response body carries `schema_version`.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::net::TcpListener;

use crate::alerts::Verdict;
use crate::error::{AlertError, RuleError};
use crate::ids::{AlertId, RuleId};
use crate::shield::{ConfigPatch, DecisionError, RuleRequest, Shield, SCHEMA_VERSION};

type Shared = Arc<Shield>;

pub fn router(shield: Shared) -> Router {
    Router::new()
        .route("/api/alerts", get(list_alerts))
        .route("/api/alerts/{id}/decision", post(decide_alert))
        .route("/api/rules", get(list_rules).post(create_rule))
        .route("/api/rules/{id}", get(get_rule).delete(delete_rule))
        .route("/api/contexts", get(list_contexts))
        .route("/api/config", get(get_config).patch(patch_config))
        .route("/api/stats", get(stats))
        .fallback(|| async { error(StatusCode::NOT_FOUND, "no such endpoint") })
        .with_state(shield)
}

pub async fn serve(listener: TcpListener, shield: Shared) {
    if let Err(e) = axum::serve(listener, router(shield)).await {
        tracing::error!(error = %e, "management api stopped");
    }
}

fn ok(status: StatusCode, mut body: Value) -> Response {
    body["schema_version"] = json!(SCHEMA_VERSION);
    (status, Json(body)).into_response()
}

fn error(status: StatusCode, msg: impl std::fmt::Display) -> Response {
    ok(status, json!({ "error": msg.to_string() }))
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, Response> {
    serde_json::from_slice(body).map_err(|e| error(StatusCode::BAD_REQUEST, format!("invalid body: {e}")))
}

fn rule_error(e: RuleError) -> Response {
    match e {
        RuleError::NotFound(_) => error(StatusCode::NOT_FOUND, e),
        RuleError::UnknownContext(_) => error(StatusCode::UNPROCESSABLE_ENTITY, e),
        RuleError::Persist(_) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

#[derive(Debug, Deserialize)]
struct AlertsQuery {
    #[serde(default)]
    wait: Option<String>,
}

async fn list_alerts(State(shield): State<Shared>, Query(q): Query<AlertsQuery>) -> Response {
    let wait = q.wait.as_deref().is_some_and(|w| w == "1" || w == "true");
    let alerts = if wait {
        shield.wait_for_alerts(shield.config().long_poll).await
    } else {
        shield.pending_alerts()
    };
    ok(StatusCode::OK, json!({ "alerts": alerts }))
}

async fn decide_alert(State(shield): State<Shared>, Path(id): Path<u64>, body: Bytes) -> Response {
    let verdict: Verdict = match parse(&body) {
        Ok(v) => v,
        Err(resp) => return resp,
    };
    match shield.decide_alert(AlertId(id), verdict) {
        Ok(ticket) => ok(StatusCode::OK, json!({ "ticket": ticket })),
        Err(DecisionError::Alert(e @ AlertError::NotFound(_))) => error(StatusCode::NOT_FOUND, e),
        Err(DecisionError::Alert(e @ AlertError::AlreadyResolved(_))) => error(StatusCode::CONFLICT, e),
        Err(DecisionError::Rule(e)) => rule_error(e),
    }
}

async fn list_rules(State(shield): State<Shared>) -> Response {
    ok(StatusCode::OK, json!({ "rules": shield.rules() }))
}

async fn create_rule(State(shield): State<Shared>, body: Bytes) -> Response {
    let req: RuleRequest = match parse(&body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    match shield.add_rule(req) {
        Ok(rule) => ok(StatusCode::CREATED, json!({ "rule": rule })),
        Err(e) => rule_error(e),
    }
}

async fn get_rule(State(shield): State<Shared>, Path(id): Path<u64>) -> Response {
    match shield.rule(RuleId(id)) {
        Some(rule) => ok(StatusCode::OK, json!({ "rule": rule })),
        None => rule_error(RuleError::NotFound(id)),
    }
}

async fn delete_rule(State(shield): State<Shared>, Path(id): Path<u64>) -> Response {
    match shield.remove_rule(RuleId(id)) {
        Ok(rule) => ok(StatusCode::OK, json!({ "rule": rule })),
        Err(e) => rule_error(e),
    }
}

async fn list_contexts(State(shield): State<Shared>) -> Response {
    ok(StatusCode::OK, json!({ "contexts": shield.contexts() }))
}

async fn get_config(State(shield): State<Shared>) -> Response {
    ok(StatusCode::OK, json!({ "config": shield.runtime_config() }))
}

async fn patch_config(State(shield): State<Shared>, body: Bytes) -> Response {
    let patch: ConfigPatch = match parse(&body) {
        Ok(p) => p,
        Err(resp) => return resp,
    };
    ok(StatusCode::OK, json!({ "config": shield.update_config(patch) }))
}

async fn stats(State(shield): State<Shared>) -> Response {
    let snapshot = serde_json::to_value(shield.snapshot()).expect("snapshot serializes");
    ok(StatusCode::OK, snapshot)
}
