//! Localhost control API consumed by the dashboard. Field names are part of
//! the contract; see `docs/api.md`.

use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{ConnectInfo, Path, Request, State};
use axum::http::StatusCode;
use axum::middleware::{self, Next};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use consentry_core::{
    check_coupling, generate_form, parse_data_request, render_policy_english, ContentHash, Origin,
    ParseError, Preset,
};
use futures_util::stream::{self, Stream};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::broadcast;

use crate::agent::{Agent, StoreError};
use crate::discovery::FetchOutcome;
use crate::prompts::{PromptError, Remember, Resolution};

pub fn router(agent: Arc<Agent>) -> Router {
    Router::new()
        .route("/", get(index))
        .route("/api/status", get(status))
        .route("/api/sites/{origin}/policy", get(site_policy))
        .route("/api/prompts", get(prompts))
        .route("/api/prompts/{id}/decision", post(decide_prompt))
        .route("/api/ruleset", get(get_ruleset).put(put_ruleset))
        .route("/api/presets", get(presets))
        .route("/api/repository", get(repository))
        .route("/api/repository/{path}", put(repo_put).delete(repo_delete))
        .route("/api/forms/check", post(forms_check))
        .route("/api/events", get(events))
        .layer(middleware::from_fn(loopback_only))
        .with_state(agent)
}

async fn loopback_only(ConnectInfo(peer): ConnectInfo<SocketAddr>, req: Request, next: Next) -> Response {
    if peer.ip().is_loopback() {
        next.run(req).await
    } else {
        error(StatusCode::FORBIDDEN, "forbidden", "control API is localhost-only")
    }
}

fn error(status: StatusCode, kind: &str, message: impl ToString) -> Response {
    (status, Json(json!({ "error": { "kind": kind, "message": message.to_string() } }))).into_response()
}

fn parse_error(kind: &str, e: &ParseError) -> Response {
    (
        StatusCode::UNPROCESSABLE_ENTITY,
        Json(json!({ "error": {
            "kind": kind,
            "message": e.message,
            "line": e.line,
            "column": e.column,
        } })),
    )
        .into_response()
}

fn parse_origin(raw: &str) -> Result<Origin, Box<Response>> {
    raw.parse()
        .map_err(|e| Box::new(error(StatusCode::BAD_REQUEST, "bad-origin", e)))
}

async fn index() -> Html<&'static str> {
    Html(concat!(
        "<!DOCTYPE html>\n<html lang=\"en\"><head><meta charset=\"utf-8\"><title>consentry</title></head>\n",
        "<body><h1>consentry control API</h1>\n<p>The agent is running. Endpoints live under <code>/api/</code>; ",
        "live events stream from <code>/api/events</code>.</p></body></html>\n"
    ))
}

async fn status(State(agent): State<Arc<Agent>>) -> impl IntoResponse {
    Json(agent.statuses())
}

#[derive(Serialize)]
struct SitePolicy {
    origin: Origin,
    raw: String,
    rendered: String,
    disclosure_uri: String,
    hash: ContentHash,
    source: crate::discovery::PolicySource,
    uri: String,
}

async fn site_policy(State(agent): State<Arc<Agent>>, Path(origin): Path<String>) -> Response {
    let origin = match parse_origin(&origin) {
        Ok(o) => o,
        Err(r) => return *r,
    };
    match agent.cached_policy(&origin).await.map(|f| f.outcome) {
        Some(FetchOutcome::Found { policy, raw, source, uri }) => Json(SitePolicy {
            origin,
            rendered: render_policy_english(&policy),
            disclosure_uri: policy.disclosure_uri.clone(),
            hash: policy.content_hash(),
            raw,
            source,
            uri,
        })
        .into_response(),
        Some(FetchOutcome::FetchError { reason }) => {
            error(StatusCode::NOT_FOUND, "fetch-error", reason)
        }
        _ => error(StatusCode::NOT_FOUND, "no-policy", format!("no policy known for {origin}")),
    }
}

async fn prompts(State(agent): State<Arc<Agent>>) -> impl IntoResponse {
    Json(agent.pending_prompts())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PromptDecision {
    resolution: Resolution,
    #[serde(default)]
    remember: Remember,
}

async fn decide_prompt(
    State(agent): State<Arc<Agent>>,
    Path(id): Path<String>,
    Json(body): Json<PromptDecision>,
) -> Response {
    match agent.resolve_prompt(&id, body.resolution, body.remember) {
        Ok(prompt) => Json(prompt).into_response(),
        Err(e @ PromptError::UnknownId) => error(StatusCode::NOT_FOUND, "unknown-id", e),
        Err(e @ PromptError::AlreadyResolved) => {
            error(StatusCode::CONFLICT, "already-resolved", e)
        }
    }
}

#[derive(Serialize)]
struct RulesetView {
    name: String,
    text: String,
    hash: ContentHash,
}

async fn get_ruleset(State(agent): State<Arc<Agent>>) -> impl IntoResponse {
    let r = agent.ruleset();
    Json(RulesetView {
        name: r.name.clone(),
        text: r.to_text(),
        hash: r.content_hash(),
    })
}

async fn put_ruleset(State(agent): State<Arc<Agent>>, body: String) -> Response {
    match agent.set_ruleset(&body) {
        Ok(warnings) => {
            let r = agent.ruleset();
            Json(json!({
                "name": r.name,
                "text": r.to_text(),
                "hash": r.content_hash(),
                "warnings": warnings,
            }))
            .into_response()
        }
        Err(e) => parse_error("parse-error", &e),
    }
}

async fn presets() -> impl IntoResponse {
    let list: Vec<_> = Preset::ALL
        .iter()
        .map(|p| json!({ "name": p.name(), "text": p.source() }))
        .collect();
    Json(list)
}

async fn repository(State(agent): State<Arc<Agent>>) -> impl IntoResponse {
    let repo = agent.repository();
    let elements: Vec<_> = agent
        .schema()
        .elements()
        .map(|e| {
            let entry = repo.entries().find(|(p, _)| *p == e.path).map(|(_, v)| v);
            json!({
                "path": e.path,
                "type": e.value_type,
                "category": e.category,
                "virtual": e.is_virtual,
                "value": entry.map(|v| v.value.to_string()),
                "modified_at": entry.map(|v| v.modified_at),
            })
        })
        .collect();
    Json(json!({ "elements": elements }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RepoValue {
    value: String,
}

fn store_error(e: StoreError) -> Response {
    match e {
        StoreError::Repo(e) => error(StatusCode::UNPROCESSABLE_ENTITY, e.kind(), e),
        StoreError::Io(m) => error(StatusCode::INTERNAL_SERVER_ERROR, "io", m),
    }
}

async fn repo_put(
    State(agent): State<Arc<Agent>>,
    Path(path): Path<String>,
    Json(body): Json<RepoValue>,
) -> Response {
    match agent.repo_set(&path, &body.value) {
        Ok(()) => Json(json!({ "path": path, "value": agent.repository().value(&path).map(|v| v.to_string()) })).into_response(),
        Err(e) => store_error(e),
    }
}

async fn repo_delete(State(agent): State<Arc<Agent>>, Path(path): Path<String>) -> Response {
    match agent.repo_delete(&path) {
        Ok(existed) => Json(json!({ "path": path, "deleted": existed })).into_response(),
        Err(e) => store_error(e),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FormCheck {
    origin: String,
    request: String,
}

async fn forms_check(State(agent): State<Arc<Agent>>, Json(body): Json<FormCheck>) -> Response {
    let origin = match parse_origin(&body.origin) {
        Ok(o) => o,
        Err(r) => return *r,
    };
    let request = match parse_data_request(&body.request, agent.schema()) {
        Ok(r) => r,
        Err(e) => return parse_error("parse-error", &e),
    };
    let fetch = agent.policy_for(&origin).await;
    let Some(policy) = fetch.policy() else {
        return error(StatusCode::CONFLICT, "no-policy", format!("no usable policy for {origin}"));
    };
    let coverage = check_coupling(&request, policy, agent.schema());
    match generate_form(&request, policy, &agent.repository(), agent.schema(), &origin.to_string()) {
        Ok(form) => Json(json!({ "status": "form", "coverage": coverage, "form": form })).into_response(),
        Err(_) => Json(json!({ "status": "uncovered", "coverage": coverage })).into_response(),
    }
}

async fn events(State(agent): State<Arc<Agent>>) -> Sse<impl Stream<Item = Result<SseEvent, Infallible>>> {
    let rx = agent.subscribe();
    let stream = stream::unfold(rx, |mut rx| async move {
        let sse = match rx.recv().await {
            Ok(event) => SseEvent::default()
                .event(event.kind())
                .json_data(&event)
                .expect("events serialize"),
            // a slow reader resyncs from the REST endpoints
            Err(broadcast::error::RecvError::Lagged(n)) => {
                SseEvent::default().event("lagged").data(n.to_string())
            }
            Err(broadcast::error::RecvError::Closed) => return None,
        };
        Some((Ok(sse), rx))
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}

