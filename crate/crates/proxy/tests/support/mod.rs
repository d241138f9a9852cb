//! A scriptable fixture origin and a running agent for end-to-end tests.
#![allow(dead_code)]

use std::collections::HashMap;
use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use bytes::Bytes;
use consentry_proxy::{start_with, Agent, Config, Running};
use http_body_util::{BodyExt, Full};
use hyper::body::Incoming;
use hyper::header::HeaderMap;
use hyper::server::conn::http1;
use hyper::service::service_fn;
use hyper::{Request, Response};
use hyper_util::rt::TokioIo;
use serde_json::Value;
use tokio::net::TcpListener;

pub const WELL_KNOWN: &str = "/.well-known/privacy-policy.ppf";

#[derive(Clone, Debug)]
pub struct Reply {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: Bytes,
    pub delay: Duration,
}

impl Reply {
    pub fn ok(body: impl Into<Bytes>) -> Self {
        Reply {
            status: 200,
            headers: Vec::new(),
            body: body.into(),
            delay: Duration::ZERO,
        }
    }

    pub fn status(status: u16) -> Self {
        Reply {
            status,
            headers: Vec::new(),
            body: Bytes::new(),
            delay: Duration::ZERO,
        }
    }

    pub fn delayed(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    pub fn header(mut self, name: &str, value: &str) -> Self {
        self.headers.push((name.into(), value.into()));
        self
    }
}

/// One request as the origin received it.
#[derive(Clone, Debug)]
pub struct Seen {
    pub method: String,
    pub path: String,
    pub headers: HeaderMap,
    pub body_len: usize,
}

/// A plain-HTTP origin on an ephemeral loopback port. Unknown paths are 404.
pub struct Site {
    pub addr: SocketAddr,
    routes: Arc<Mutex<HashMap<String, Reply>>>,
    seen: Arc<Mutex<Vec<Seen>>>,
}

impl Site {
    pub async fn start() -> Site {
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let routes: Arc<Mutex<HashMap<String, Reply>>> = Arc::default();
        let seen: Arc<Mutex<Vec<Seen>>> = Arc::default();
        let (r, s) = (routes.clone(), seen.clone());
        tokio::spawn(async move {
            loop {
                let Ok((stream, _)) = listener.accept().await else { return };
                let (r, s) = (r.clone(), s.clone());
                tokio::spawn(async move {
                    let svc = service_fn(move |req: Request<Incoming>| {
                        let (r, s) = (r.clone(), s.clone());
                        async move {
                            let (parts, body) = req.into_parts();
                            let body = body.collect().await.map(|b| b.to_bytes()).unwrap_or_default();
                            let path = parts.uri.path().to_string();
                            s.lock().unwrap().push(Seen {
                                method: parts.method.to_string(),
                                path: path.clone(),
                                headers: parts.headers,
                                body_len: body.len(),
                            });
                            let reply = r.lock().unwrap().get(&path).cloned().unwrap_or(Reply::status(404));
                            tokio::time::sleep(reply.delay).await;
                            let mut resp = Response::new(Full::new(reply.body));
                            *resp.status_mut() = reply.status.try_into().unwrap();
                            for (k, v) in reply.headers {
                                resp.headers_mut().append(
                                    hyper::header::HeaderName::from_bytes(k.as_bytes()).unwrap(),
                                    v.parse().unwrap(),
                                );
                            }
                            Ok::<_, Infallible>(resp)
                        }
                    });
                    let _ = http1::Builder::new().serve_connection(TokioIo::new(stream), svc).await;
                });
            }
        });
        Site { addr, routes, seen }
    }

    /// A site serving `policy` at the well-known path and `body` at `/`.
    pub async fn with_policy(policy: &str, body: &[u8]) -> Site {
        let site = Site::start().await;
        site.route(WELL_KNOWN, Reply::ok(policy.to_string()));
        site.route("/", Reply::ok(body.to_vec()));
        site
    }

    pub fn route(&self, path: &str, reply: Reply) {
        self.routes.lock().unwrap().insert(path.to_string(), reply);
    }

    pub fn origin(&self) -> String {
        format!("http://127.0.0.1:{}", self.addr.port())
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.origin())
    }

    pub fn seen(&self) -> Vec<Seen> {
        self.seen.lock().unwrap().clone()
    }

    /// Requests other than policy discovery.
    pub fn content_requests(&self) -> Vec<Seen> {
        self.seen().into_iter().filter(|s| s.path != WELL_KNOWN).collect()
    }
}

pub struct Harness {
    pub running: Running,
    /// Sends everything through the proxy.
    pub browser: reqwest::Client,
    /// Talks to the control API directly.
    pub api: reqwest::Client,
    pub dir: tempfile::TempDir,
}

/// Starts an agent on ephemeral ports. `tune` edits the config first; paths
/// may be relative to the harness's temporary directory.
pub async fn agent(tune: impl FnOnce(&mut Config)) -> Harness {
    agent_with(&[], tune).await
}

/// Like [`agent`], writing `(name, contents)` files into the directory first.
pub async fn agent_with(files: &[(&str, &str)], tune: impl FnOnce(&mut Config)) -> Harness {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in files {
        std::fs::write(dir.path().join(name), text).unwrap();
    }
    let mut config = Config::default();
    tune(&mut config);
    let rebase = |p: &mut std::path::PathBuf| {
        if p.is_relative() {
            *p = dir.path().join(&*p);
        }
    };
    config.overrides.as_mut().map(rebase);
    config.repository.as_mut().map(rebase);
    if !config.ruleset.starts_with("preset:") {
        config.ruleset = dir.path().join(&config.ruleset).display().to_string();
    }
    let agent = Agent::new(config).expect("agent config");
    let proxy = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let control = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let running = start_with(agent, proxy, control).await.unwrap();
    let browser = reqwest::Client::builder()
        .proxy(reqwest::Proxy::all(format!("http://{}", running.proxy_addr)).unwrap())
        .timeout(Duration::from_secs(90))
        .build()
        .unwrap();
    let api = reqwest::Client::builder().no_proxy().build().unwrap();
    Harness {
        running,
        browser,
        api,
        dir,
    }
}

impl Harness {
    pub fn agent(&self) -> &Arc<Agent> {
        &self.running.agent
    }

    pub fn control(&self, path: &str) -> String {
        format!("http://{}{path}", self.running.control_addr)
    }

    pub async fn get_json(&self, path: &str) -> (u16, Value) {
        let resp = self.api.get(self.control(path)).send().await.unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap())
    }

    pub async fn send_json(&self, method: reqwest::Method, path: &str, body: Value) -> (u16, Value) {
        let resp = self
            .api
            .request(method, self.control(path))
            .json(&body)
            .send()
            .await
            .unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap())
    }

    /// Polls until a prompt is pending for `origin`, returning its id.
    pub async fn wait_for_prompt(&self, origin: &str) -> String {
        for _ in 0..400 {
            let (_, list) = self.get_json("/api/prompts").await;
            if let Some(p) = list
                .as_array()
                .unwrap()
                .iter()
                .find(|p| p["origin"] == origin && p["state"] == "pending")
            {
                return p["id"].as_str().unwrap().to_string();
            }
            tokio::time::sleep(Duration::from_millis(25)).await;
        }
        panic!("no prompt appeared for {origin}");
    }

    pub async fn resolve(&self, id: &str, resolution: &str, remember: &str) -> (u16, Value) {
        self.send_json(
            reqwest::Method::POST,
            &format!("/api/prompts/{id}/decision"),
            serde_json::json!({ "resolution": resolution, "remember": remember }),
        )
        .await
    }
}

/// Corpus policy text by file name prefix, e.g. `"05"`.
pub fn corpus_policy(prefix: &str) -> String {
    consentry_testkit::corpus()
        .into_iter()
        .find(|(n, _)| n.starts_with(prefix))
        .unwrap_or_else(|| panic!("no corpus policy {prefix}"))
        .1
}
