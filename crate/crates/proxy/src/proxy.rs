//! The forward proxy listener: plain HTTP is forwarded after enforcement,
//! HTTPS `CONNECT` tunnels are either opened opaquely or refused.

use std::convert::Infallible;
use std::sync::Arc;

use bytes::Bytes;
use consentry_core::engine::Decision;
use consentry_core::{Action, Origin};
use http_body_util::combinators::BoxBody;
use http_body_util::{BodyExt, Full};
use hyper::body::Incoming;
use hyper::header::{HeaderMap, HeaderName, HeaderValue};
use hyper::{Method, Request, Response, StatusCode};
use hyper_util::client::legacy::connect::HttpConnector;
use hyper_util::client::legacy::Client;
use hyper_util::rt::{TokioExecutor, TokioIo};
use tokio::net::TcpStream;

use crate::agent::Agent;
use crate::discovery::{PolicyFetchResult, POLICY_HEADER, WELL_KNOWN_PATH};
use crate::page::{block_page, decision_marker, DECISION_HEADER};
use crate::prompts::Outcome;

pub type Body = BoxBody<Bytes, hyper::Error>;
pub type Upstream = Client<HttpConnector, Incoming>;

pub fn upstream_client() -> Upstream {
    Client::builder(TokioExecutor::new())
        .set_host(true)
        .build_http()
}

fn full(bytes: impl Into<Bytes>) -> Body {
    Full::new(bytes.into()).map_err(|never| match never {}).boxed()
}

fn plain(status: StatusCode, text: &str) -> Response<Body> {
    let mut resp = Response::new(full(text.to_string()));
    *resp.status_mut() = status;
    resp.headers_mut()
        .insert("content-type", HeaderValue::from_static("text/plain; charset=utf-8"));
    resp
}

/// Headers that describe a single connection, not the message.
const HOP_BY_HOP: &[&str] = &[
    "connection",
    "keep-alive",
    "proxy-connection",
    "proxy-authenticate",
    "proxy-authorization",
    "te",
    "trailer",
    "transfer-encoding",
    "upgrade",
];

fn strip_hop_by_hop(headers: &mut HeaderMap) {
    let named: Vec<HeaderName> = headers
        .get_all("connection")
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(','))
        .filter_map(|n| HeaderName::from_bytes(n.trim().as_bytes()).ok())
        .collect();
    for name in named {
        headers.remove(name);
    }
    for name in HOP_BY_HOP {
        headers.remove(*name);
    }
}

enum Gate {
    Pass,
    Refuse(Response<Body>),
}

fn refusal(origin: &Origin, decision: &Decision, fetch: &PolicyFetchResult, prompt: Option<Outcome>) -> Response<Body> {
    let disclosure = fetch.policy().map(|p| p.disclosure_uri.as_str());
    let mut resp = Response::new(full(block_page(origin, decision, disclosure, prompt)));
    *resp.status_mut() = StatusCode::FORBIDDEN;
    let h = resp.headers_mut();
    h.insert("content-type", HeaderValue::from_static("text/html; charset=utf-8"));
    h.insert("cache-control", HeaderValue::from_static("no-store"));
    h.insert(DECISION_HEADER, HeaderValue::from_static(decision_marker(prompt)));
    if let Ok(v) = HeaderValue::from_str(&decision.fired_rule.to_string()) {
        h.insert("x-privacy-fired-rule", v);
    }
    resp
}

/// Applies the site's decision. Nothing is sent upstream before this
/// returns `Pass`.
async fn gate(agent: &Arc<Agent>, origin: &Origin) -> Gate {
    let (decision, fetch) = agent.decide(origin).await;
    match decision.action {
        Action::Accept | Action::Inform => Gate::Pass,
        Action::Block => Gate::Refuse(refusal(origin, &decision, &fetch, None)),
        Action::Warn => {
            let (_, rx) = agent.open_prompt(origin, decision.clone(), &fetch);
            // a dropped channel means the prompt machinery failed: fail closed
            let outcome = rx.await.unwrap_or(Outcome::Block);
            match outcome {
                Outcome::Allow => Gate::Pass,
                other => Gate::Refuse(refusal(origin, &decision, &fetch, Some(other))),
            }
        }
    }
}

pub async fn handle(
    agent: Arc<Agent>,
    client: Upstream,
    req: Request<Incoming>,
) -> Result<Response<Body>, Infallible> {
    if req.method() == Method::CONNECT {
        return Ok(tunnel(agent, req).await);
    }
    Ok(forward(agent, client, req).await)
}

fn request_origin(req: &Request<Incoming>) -> Option<Origin> {
    let uri = req.uri();
    if uri.scheme_str() != Some("http") {
        return None;
    }
    let host = uri.host()?;
    Origin::new("http", host, uri.port_u16().unwrap_or(80)).ok()
}

async fn forward(agent: Arc<Agent>, client: Upstream, mut req: Request<Incoming>) -> Response<Body> {
    let Some(origin) = request_origin(&req) else {
        return plain(
            StatusCode::BAD_REQUEST,
            "this is a forward proxy: send absolute-form http:// requests or CONNECT\n",
        );
    };
    // the policy itself is always reachable
    if req.uri().path() != WELL_KNOWN_PATH {
        if let Gate::Refuse(resp) = gate(&agent, &origin).await {
            return resp;
        }
    }

    let config = agent.config();
    let headers = req.headers_mut();
    strip_hop_by_hop(headers);
    if config.strip_referrer {
        headers.remove("referer");
    }
    if config.block_cookies {
        headers.remove("cookie");
    }

    let mut resp = match client.request(req).await {
        Ok(r) => r,
        Err(e) => {
            tracing::debug!(%origin, error = %e, "upstream request failed");
            return plain(StatusCode::BAD_GATEWAY, &format!("upstream error: {e}\n"));
        }
    };
    let headers = resp.headers_mut();
    if headers.contains_key("set-cookie") {
        agent.saw_cookie(&origin);
    }
    if let Some(v) = headers.get(POLICY_HEADER).and_then(|v| v.to_str().ok()) {
        agent.saw_policy_header(&origin, v);
    }
    if config.block_cookies {
        headers.remove("set-cookie");
    }
    strip_hop_by_hop(headers);
    resp.map(|b| b.boxed())
}

async fn tunnel(agent: Arc<Agent>, req: Request<Incoming>) -> Response<Body> {
    let Some(authority) = req.uri().authority().cloned() else {
        return plain(StatusCode::BAD_REQUEST, "CONNECT needs host:port\n");
    };
    let port = authority.port_u16().unwrap_or(443);
    let Ok(origin) = Origin::new("https", authority.host(), port) else {
        return plain(StatusCode::BAD_REQUEST, "bad CONNECT target\n");
    };
    if let Gate::Refuse(resp) = gate(&agent, &origin).await {
        return resp;
    }
    let target = format!("{}:{}", authority.host().trim_matches(['[', ']']), port);
    let mut upstream = match TcpStream::connect(&target).await {
        Ok(s) => s,
        Err(e) => return plain(StatusCode::BAD_GATEWAY, &format!("upstream error: {e}\n")),
    };
    tokio::spawn(async move {
        match hyper::upgrade::on(req).await {
            Ok(upgraded) => {
                let mut client = TokioIo::new(upgraded);
                if let Err(e) = tokio::io::copy_bidirectional(&mut client, &mut upstream).await {
                    tracing::debug!(%origin, error = %e, "tunnel closed");
                }
            }
            Err(e) => tracing::debug!(error = %e, "CONNECT upgrade failed"),
        }
    });
    Response::new(full(Bytes::new()))
}
