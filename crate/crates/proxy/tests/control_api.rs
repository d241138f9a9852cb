mod support;

use std::time::Duration;

use reqwest::Method;
use serde_json::{json, Value};
use support::{agent, agent_with, corpus_policy, Harness, Site};

const BODY: &[u8] = b"ok\n";

fn enc(origin: &str) -> String {
    origin.replace(':', "%3A").replace('/', "%2F")
}

async fn visit(h: &Harness, site: &Site) -> u16 {
    h.browser.get(site.url("/")).send().await.unwrap().status().as_u16()
}

/// Starts a held request and returns its handle plus the prompt id.
async fn held(h: &Harness, site: &Site) -> (tokio::task::JoinHandle<u16>, String) {
    let b = h.browser.clone();
    let url = site.url("/");
    let task = tokio::spawn(async move { b.get(url).send().await.unwrap().status().as_u16() });
    let id = h.wait_for_prompt(&site.origin()).await;
    (task, id)
}

#[tokio::test]
async fn index_page_is_served() {
    let h = agent(|_| {}).await;
    let resp = h.api.get(h.control("/")).send().await.unwrap();
    assert_eq!(resp.status(), 200);
    assert!(resp.text().await.unwrap().contains("/api/"));
}

#[tokio::test]
async fn status_lists_visited_sites() {
    let h = agent(|_| {}).await;
    let (_, v) = h.get_json("/api/status").await;
    assert_eq!(v, json!([]));
    let site = Site::with_policy(&corpus_policy("01"), BODY).await;
    visit(&h, &site).await;
    let (code, v) = h.get_json("/api/status").await;
    assert_eq!(code, 200);
    let s = &v[0];
    assert_eq!(s["origin"], site.origin());
    assert_eq!(s["policy_enabled"], true);
    assert_eq!(s["cookies_seen"], false);
    assert_eq!(s["seals"], json!(["TRUSTe"]));
    assert_eq!(s["disclosure_uri"], "https://books.example/privacy");
    assert_eq!(s["fetch"], "found");
    assert_eq!(s["last_decision"]["action"], "accept");
    assert_eq!(s["last_decision"]["fired_rule"], "default");
    assert_eq!(s["last_decision"]["ruleset_name"], "cautious");
}

#[tokio::test]
async fn site_policy_view() {
    let h = agent(|_| {}).await;
    let site = Site::with_policy(&corpus_policy("04"), BODY).await;
    let path = format!("/api/sites/{}/policy", enc(&site.origin()));
    let (code, v) = h.get_json(&path).await;
    assert_eq!((code, v["error"]["kind"].as_str()), (404, Some("no-policy")));
    visit(&h, &site).await;
    let (code, v) = h.get_json(&path).await;
    assert_eq!(code, 200);
    assert_eq!(v["origin"], site.origin());
    assert_eq!(v["raw"], corpus_policy("04"));
    assert_eq!(v["source"], "well-known");
    assert_eq!(v["disclosure_uri"], "https://news.example/privacy");
    assert!(v["rendered"].as_str().unwrap().contains("Daily Wire"));
    assert_eq!(v["hash"].as_str().unwrap().len(), 64);
    let (code, v) = h.get_json("/api/sites/nonsense/policy").await;
    assert_eq!((code, v["error"]["kind"].as_str()), (400, Some("bad-origin")));
}

#[tokio::test]
async fn prompt_listing_and_allow() {
    let h = agent(|_| {}).await;
    let site = Site::with_policy(&corpus_policy("05"), BODY).await;
    let (task, id) = held(&h, &site).await;
    let (_, list) = h.get_json("/api/prompts").await;
    let p = &list[0];
    assert_eq!(p["id"], id.as_str());
    assert_eq!(p["state"], "pending");
    assert_eq!(p["decision"]["action"], "warn");
    assert_eq!(p["decision"]["fired_rule"], "2");
    assert!(p["summary"].as_str().unwrap().contains("unrelated"));
    assert!(p["created_at"].is_string());
    let (code, v) = h.resolve(&id, "allow", "none").await;
    assert_eq!(code, 200);
    assert_eq!(v["state"], "resolved");
    assert_eq!(v["outcome"], "allow");
    assert_eq!(task.await.unwrap(), 200);
    let (_, list) = h.get_json("/api/prompts").await;
    assert_eq!(list, json!([]));
    // not remembered: the next visit prompts again
    let (task, id) = held(&h, &site).await;
    h.resolve(&id, "block", "none").await;
    assert_eq!(task.await.unwrap(), 403);
}

#[tokio::test]
async fn prompt_errors() {
    let h = agent(|_| {}).await;
    let (code, v) = h.resolve("no-such-id", "allow", "none").await;
    assert_eq!((code, v["error"]["kind"].as_str()), (404, Some("unknown-id")));
    let site = Site::with_policy(&corpus_policy("05"), BODY).await;
    let (task, id) = held(&h, &site).await;
    let resp = h
        .api
        .post(h.control(&format!("/api/prompts/{id}/decision")))
        .json(&json!({ "resolution": "maybe" }))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 422);
    assert_eq!(h.resolve(&id, "block", "none").await.0, 200);
    let (code, v) = h.resolve(&id, "allow", "none").await;
    assert_eq!((code, v["error"]["kind"].as_str()), (409, Some("already-resolved")));
    assert_eq!(task.await.unwrap(), 403);
}

#[tokio::test]
async fn concurrent_resolutions_have_one_winner() {
    let h = agent(|_| {}).await;
    let site = Site::with_policy(&corpus_policy("05"), BODY).await;
    let (task, id) = held(&h, &site).await;
    let mut answers = Vec::new();
    for i in 0..16 {
        let (api, url) = (h.api.clone(), h.control(&format!("/api/prompts/{id}/decision")));
        let resolution = if i % 2 == 0 { "allow" } else { "block" };
        answers.push(tokio::spawn(async move {
            let r = api.post(url).json(&json!({ "resolution": resolution })).send().await.unwrap();
            (r.status().as_u16(), resolution)
        }));
    }
    let mut winners = Vec::new();
    for a in answers {
        let (code, resolution) = a.await.unwrap();
        match code {
            200 => winners.push(resolution),
            409 => {}
            other => panic!("unexpected {other}"),
        }
    }
    assert_eq!(winners.len(), 1);
    let expected = if winners[0] == "allow" { 200 } else { 403 };
    assert_eq!(task.await.unwrap(), expected);
}

#[tokio::test]
async fn remembered_choices_become_overrides() {
    let h = agent(|c| c.overrides = Some("choices.ovr".into())).await;
    let persistent = Site::with_policy(&corpus_policy("05"), BODY).await;
    let session = Site::with_policy(&corpus_policy("08"), BODY).await;

    let (task, id) = held(&h, &persistent).await;
    h.resolve(&id, "allow", "persistent").await;
    assert_eq!(task.await.unwrap(), 200);
    let (task, id) = held(&h, &session).await;
    h.resolve(&id, "block", "session").await;
    assert_eq!(task.await.unwrap(), 403);

    // both are answered without a prompt now
    assert_eq!(visit(&h, &persistent).await, 200);
    assert_eq!(visit(&h, &session).await, 403);
    assert!(h.agent().pending_prompts().is_empty());

    let saved = std::fs::read_to_string(h.dir.path().join("choices.ovr")).unwrap();
    assert!(saved.contains(&persistent.origin()), "{saved}");
    assert!(!saved.contains(&session.origin()), "{saved}");
}

#[tokio::test]
async fn ruleset_get_and_put() {
    let initial = "ruleset \"mine\" {\n  default accept\n}\n";
    let h = agent_with(&[("mine.apr", initial)], |c| c.ruleset = "mine.apr".into()).await;
    let (code, v) = h.get_json("/api/ruleset").await;
    assert_eq!(code, 200);
    assert_eq!(v["name"], "mine");
    let text = "ruleset \"mine\" {\n  rule block when any-statement(data under user.shoe-size) explain \"x\"\n  default accept\n}\n";
    let resp = h.api.put(h.control("/api/ruleset")).body(text).send().await.unwrap();
    assert_eq!(resp.status(), 200);
    let v: Value = resp.json().await.unwrap();
    assert_eq!(v["text"], text);
    assert_eq!(v["hash"].as_str().unwrap().len(), 64);
    let warnings = v["warnings"].as_array().unwrap();
    assert_eq!(warnings.len(), 1);
    assert!(warnings[0]["message"].as_str().unwrap().contains("user.shoe-size"));
    assert_eq!(std::fs::read_to_string(h.dir.path().join("mine.apr")).unwrap(), text);

    let resp = h
        .api
        .put(h.control("/api/ruleset"))
        .body("ruleset \"x\" {\n  rule explode\n}\n")
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 422);
    let v: Value = resp.json().await.unwrap();
    assert_eq!(v["error"]["kind"], "parse-error");
    assert_eq!(v["error"]["line"], 2);
    assert!(v["error"]["column"].as_u64().unwrap() >= 1);
    // the failed edit left the active ruleset alone
    assert_eq!(h.get_json("/api/ruleset").await.1["text"], text);
}

#[tokio::test]
async fn put_ruleset_changes_enforcement() {
    let h = agent(|_| {}).await;
    let site = Site::with_policy(&corpus_policy("01"), BODY).await;
    assert_eq!(visit(&h, &site).await, 200);
    let text = "ruleset \"no\" {\n  default block\n}\n";
    h.api.put(h.control("/api/ruleset")).body(text).send().await.unwrap();
    assert_eq!(visit(&h, &site).await, 403);
}

#[tokio::test]
async fn presets_are_listed() {
    let h = agent(|_| {}).await;
    let (code, v) = h.get_json("/api/presets").await;
    assert_eq!(code, 200);
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|p| p["name"].as_str().unwrap()).collect();
    let expected: Vec<&str> = consentry_core::Preset::ALL.iter().map(|p| p.name()).collect();
    assert_eq!(names, expected);
    assert_eq!(names.len(), 3);
    for p in v.as_array().unwrap() {
        assert!(p["text"].as_str().unwrap().starts_with("ruleset "));
    }
}

#[tokio::test]
async fn repository_endpoints() {
    let h = agent(|c| c.repository = Some("me.prf".into())).await;
    let (code, v) = h.get_json("/api/repository").await;
    assert_eq!(code, 200);
    let elements = v["elements"].as_array().unwrap();
    assert_eq!(elements.len(), 27);
    let given = elements.iter().find(|e| e["path"] == "user.name.given").unwrap();
    assert_eq!(given["value"], Value::Null);
    assert_eq!(given["virtual"], false);
    assert!(given["type"].is_string() && given["category"].is_string());

    let (code, v) = h
        .send_json(Method::PUT, "/api/repository/user.name.given", json!({ "value": "Alice" }))
        .await;
    assert_eq!((code, v["value"].as_str()), (200, Some("Alice")));
    let (_, v) = h.get_json("/api/repository").await;
    let given = v["elements"].as_array().unwrap().iter().find(|e| e["path"] == "user.name.given").unwrap().clone();
    assert_eq!(given["value"], "Alice");
    assert!(given["modified_at"].is_string());
    let saved = std::fs::read_to_string(h.dir.path().join("me.prf")).unwrap();
    assert!(saved.contains("user.name.given"));

    let (code, v) = h.send_json(Method::PUT, "/api/repository/user.bday", json!({ "value": "soon" })).await;
    assert_eq!((code, v["error"]["kind"].as_str()), (422, Some("type-mismatch")));
    let (code, v) = h.send_json(Method::PUT, "/api/repository/user.shoe", json!({ "value": "9" })).await;
    assert_eq!((code, v["error"]["kind"].as_str()), (422, Some("unknown-element")));

    let resp = h.api.delete(h.control("/api/repository/user.name.given")).send().await.unwrap();
    let v: Value = resp.json().await.unwrap();
    assert_eq!(v["deleted"], true);
    assert!(h.agent().repository().value("user.name.given").is_none());
}

#[tokio::test]
async fn form_check() {
    let h = agent(|_| {}).await;
    h.agent().repo_set("user.name.given", "Alice").unwrap();
    let site = Site::with_policy(&corpus_policy("01"), BODY).await;
    let req = consentry_testkit::read_fixture("coupling/01-signup.pdr");
    let (code, v) = h
        .send_json(Method::POST, "/api/forms/check", json!({ "origin": site.origin(), "request": req }))
        .await;
    assert_eq!(code, 200);
    assert_eq!(v["status"], "form");
    assert_eq!(v["coverage"]["uncovered"], json!([]));
    let fields = v["form"]["fields"].as_array().unwrap();
    assert_eq!(fields.len(), 2);
    assert_eq!(fields[0]["path"], "user.name.given");
    assert_eq!(fields[0]["value"], "Alice");
    assert_eq!(fields[0]["necessity_flag"], false);
    assert_eq!(fields[0]["annotations"]["purposes"], json!(["core-service"]));

    let req = consentry_testkit::read_fixture("coupling/02-birthday.pdr");
    let (code, v) = h
        .send_json(Method::POST, "/api/forms/check", json!({ "origin": site.origin(), "request": req }))
        .await;
    assert_eq!(code, 200);
    assert_eq!(v["status"], "uncovered");
    assert_eq!(v["coverage"]["uncovered"], json!(["user.bday"]));
    assert!(v.get("form").is_none());

    let (code, v) = h
        .send_json(Method::POST, "/api/forms/check", json!({ "origin": site.origin(), "request": "data-request {" }))
        .await;
    assert_eq!((code, v["error"]["kind"].as_str()), (422, Some("parse-error")));

    let bare = Site::start().await;
    let req = consentry_testkit::read_fixture("coupling/01-signup.pdr");
    let (code, v) = h
        .send_json(Method::POST, "/api/forms/check", json!({ "origin": bare.origin(), "request": req }))
        .await;
    assert_eq!((code, v["error"]["kind"].as_str()), (409, Some("no-policy")));
}

/// Reads SSE chunks until every wanted event name has appeared.
async fn read_events(resp: &mut reqwest::Response, wanted: &[&str]) -> String {
    let mut buf = String::new();
    let deadline = tokio::time::Instant::now() + Duration::from_secs(10);
    while !wanted.iter().all(|w| buf.contains(&format!("event: {w}\n"))) {
        let chunk = tokio::time::timeout_at(deadline, resp.chunk())
            .await
            .unwrap_or_else(|_| panic!("missing events in:\n{buf}"))
            .unwrap()
            .expect("stream open");
        buf.push_str(&String::from_utf8_lossy(&chunk));
    }
    buf
}

#[tokio::test]
async fn event_stream() {
    let h = agent(|_| {}).await;
    let mut events = h.api.get(h.control("/api/events")).send().await.unwrap();
    assert_eq!(events.status(), 200);
    assert!(events.headers()["content-type"].to_str().unwrap().starts_with("text/event-stream"));

    let news = Site::with_policy(&corpus_policy("04"), BODY).await;
    visit(&h, &news).await;
    let buf = read_events(&mut events, &["status-changed", "decision", "notice"]).await;
    let data: Vec<Value> = buf
        .lines()
        .filter_map(|l| l.strip_prefix("data: "))
        .map(|d| serde_json::from_str(d).unwrap())
        .collect();
    let notice = data.iter().find(|d| d["kind"] == "notice").unwrap();
    assert_eq!(notice["origin"], news.origin());
    assert_eq!(notice["decision"]["action"], "inform");

    let ads = Site::with_policy(&corpus_policy("05"), BODY).await;
    let (task, id) = held(&h, &ads).await;
    read_events(&mut events, &["prompt-created"]).await;
    h.resolve(&id, "allow", "none").await;
    let buf = read_events(&mut events, &["prompt-resolved"]).await;
    assert!(buf.contains(&id));
    assert_eq!(task.await.unwrap(), 200);
}

#[tokio::test]
async fn timed_out_prompt_is_announced() {
    let h = agent(|c| c.warn_timeout = 1).await;
    let mut events = h.api.get(h.control("/api/events")).send().await.unwrap();
    let site = Site::with_policy(&corpus_policy("05"), BODY).await;
    assert_eq!(visit(&h, &site).await, 403);
    let buf = read_events(&mut events, &["prompt-created", "prompt-resolved"]).await;
    assert!(buf.contains("\"outcome\":\"timed-out\""), "{buf}");
}
