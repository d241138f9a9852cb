//! End-to-end acceptance run: one PASS/FAIL line per criterion, non-zero
//! exit if any fails.

mod support;

use std::collections::BTreeSet;
use std::future::Future;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use consentry_core::engine::{eval_atom, evaluate};
use consentry_core::rules::Atom;
use consentry_core::{
    base_schema, check_coupling, generate_form, parse_data_request, parse_policy, parse_ruleset,
    serialize_policy, serialize_ruleset, Action, OverrideStore, Preset, Repository,
};
use consentry_testkit::oracle::Table;
use consentry_testkit::space::{form, two_by_two};
use consentry_testkit::{corpus, fixture_dir, gen, mutate::mutate, oracle_coupling, oracle_decisions, read_dir_sorted, read_fixture};
use proptest::test_runner::{Config as RunnerConfig, TestCaseError, TestRunner};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{agent, agent_with, corpus_policy, Reply, Site};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| Err(panic_text(p)))
}

async fn guarded_async(f: impl Future<Output = Outcome> + Send + 'static) -> Outcome {
    tokio::spawn(f)
        .await
        .unwrap_or_else(|e| Err(if e.is_panic() { panic_text(e.into_panic()) } else { e.to_string() }))
}

fn panic_text(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".into())
}

async fn four_actions() -> Outcome {
    let start = Instant::now();
    let h = agent(|_| {}).await;
    let body = b"four-action fixture\n";
    let mut actions = Vec::new();
    for (prefix, expect_status) in [("01", 200), ("04", 200), ("05", 200), ("03", 403)] {
        let site = Site::with_policy(&corpus_policy(prefix), body).await;
        let b = h.browser.clone();
        let url = site.url("/");
        let req = tokio::spawn(async move { b.get(url).send().await.unwrap() });
        if prefix == "05" {
            let id = h.wait_for_prompt(&site.origin()).await;
            let (code, _) = h.resolve(&id, "allow", "none").await;
            ensure!(code == 200, "resolving the warn prompt returned {code}");
        }
        let resp = req.await.unwrap();
        let status = resp.status().as_u16();
        let bytes = resp.bytes().await.unwrap();
        ensure!(status == expect_status, "{prefix}: status {status}");
        if status == 200 {
            ensure!(bytes.as_ref() == body, "{prefix}: body altered");
        } else {
            ensure!(site.content_requests().is_empty(), "{prefix}: blocked request reached origin");
        }
        let decision = h.agent().site_status(&site.origin().parse().unwrap()).last_decision;
        actions.push(decision.ok_or("no decision recorded")?.action);
    }
    let distinct: BTreeSet<Action> = actions.iter().copied().collect();
    ensure!(
        distinct == BTreeSet::from([Action::Accept, Action::Inform, Action::Warn, Action::Block]),
        "actions {actions:?}"
    );
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(60), "took {took:?}");
    Ok(format!("accept, inform, warn, block once each via proxy in {:.2}s", took.as_secs_f64()))
}

fn oracle_corpus() -> Outcome {
    let schema = base_schema();
    let table = oracle_decisions();
    ensure!(table.len() == 60, "oracle table has {} records", table.len());
    let mut expected = table.into_iter();
    let mut n = 0;
    for (name, text) in corpus() {
        let policy = parse_policy(&text, &schema).map_err(|e| format!("{name}: {e}"))?;
        for preset in Preset::ALL {
            let ((pname, rname), record) = expected.next().ok_or("table too short")?;
            ensure!(pname == name && rname == preset.name(), "table order at {pname} {rname}");
            let got = evaluate(&policy, &preset.ruleset(), &schema).to_text();
            ensure!(got == record, "{name} under {}:\n{got}expected\n{record}", preset.name());
            n += 1;
        }
    }
    Ok(format!("{n}/60 decisions byte-equal"))
}

fn exhaustive() -> Outcome {
    let schema = base_schema();
    let table = Table::new(&schema);
    let (policies, preds) = two_by_two();
    ensure!(policies.len() == 16, "{} policies", policies.len());
    let forms: BTreeSet<&str> = preds.iter().map(form).collect();
    ensure!(forms.len() == 9, "{} predicate forms", forms.len());
    let mut checked = 0;
    for p in &policies {
        for pred in &preds {
            for atom in [Atom::AnyStatement(pred.clone()), Atom::AllStatements(pred.clone())] {
                let (engine, oracle) = (eval_atom(p, &atom, &schema), table.atom(p, &atom));
                ensure!(engine == oracle, "{atom} on\n{}engine {engine}, oracle {oracle}", p.to_text());
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} atom evaluations over 16 policies x 9 forms agree"))
}

fn round_trip() -> Outcome {
    let schema = base_schema();
    let config = RunnerConfig {
        cases: 1000,
        failure_persistence: None,
        ..RunnerConfig::default()
    };
    TestRunner::new(config.clone())
        .run(&gen::policy(), |p| {
            let text = serialize_policy(&p);
            let back = parse_policy(&text, &schema).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
            if back != p || serialize_policy(&back) != text {
                return Err(TestCaseError::fail(format!("policy changed:\n{text}")));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    TestRunner::new(config)
        .run(&gen::ruleset(), |r| {
            let text = serialize_ruleset(&r);
            let back = parse_ruleset(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
            if back != r || serialize_ruleset(&back) != text {
                return Err(TestCaseError::fail(format!("ruleset changed:\n{text}")));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    let mut seeds: Vec<String> = corpus().into_iter().map(|(_, t)| t).collect();
    seeds.extend(Preset::ALL.iter().map(|p| p.source().to_string()));
    seeds.extend(read_dir_sorted(&fixture_dir().join("coupling"), "pdr").into_iter().map(|(_, t)| t));
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    let hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut crashes = Vec::new();
    for i in 0..10_000 {
        let input = mutate(&seeds[i % seeds.len()], &mut rng);
        let ok = catch_unwind(|| {
            let _ = parse_policy(&input, &schema);
            let _ = parse_ruleset(&input);
            let _ = parse_data_request(&input, &schema);
            let _ = Repository::parse(&input, &schema);
            let _ = OverrideStore::parse(&input);
            let _ = schema.load_extension(&input);
        });
        if ok.is_err() {
            crashes.push(input);
        }
    }
    std::panic::set_hook(hook);
    ensure!(crashes.is_empty(), "{} crashes, first input:\n{}", crashes.len(), crashes[0]);
    Ok("1000 policies + 1000 rulesets round-trip; 10000 mutated inputs, 0 crashes".into())
}

fn coupling() -> Outcome {
    let s = base_schema();
    let pairs = oracle_coupling();
    ensure!(pairs.len() == 10, "{} pairs", pairs.len());
    let (mut forms, mut errors) = (0, 0);
    for (req, pol, expected) in pairs {
        let request = parse_data_request(&read_fixture(&format!("coupling/{req}")), &s).map_err(|e| e.to_string())?;
        let policy = parse_policy(&read_fixture(&format!("corpus/{pol}")), &s).map_err(|e| e.to_string())?;
        let report = check_coupling(&request, &policy, &s);
        ensure!(report.uncovered == expected, "{req}: uncovered {:?}, oracle {expected:?}", report.uncovered);
        match generate_form(&request, &policy, &Repository::new(), &s, "https://site.example:443") {
            Ok(_) => {
                ensure!(report.uncovered.is_empty(), "{req}: form generated despite uncovered data");
                forms += 1;
            }
            Err(e) => {
                ensure!(!report.uncovered.is_empty(), "{req}: refused with full coverage");
                ensure!(e.uncovered == expected, "{req}: error lists {:?}, oracle {expected:?}", e.uncovered);
                errors += 1;
            }
        }
    }
    Ok(format!("10 pairs: {forms} forms, {errors} coupling errors, all as the oracle says"))
}

async fn soundness() -> Outcome {
    let no_seal = corpus_policy("08");
    ensure!(!no_seal.contains("seal "), "fixture 08 carries a seal");
    // bytes that would show any rewriting: binary, CRLFs, NULs, invalid UTF-8
    let mut body = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    body.resize(64 * 1024, 0);
    rng.fill_bytes(&mut body);
    body.extend_from_slice(b"\r\n\0\xff\xfe</html>");

    let strict = agent(|c| c.ruleset = "preset:strict".into()).await;
    let site = Site::with_policy(&no_seal, &body).await;
    let resp = strict.browser.get(site.url("/")).send().await.unwrap();
    let status = resp.status().as_u16();
    let page = resp.bytes().await.unwrap();
    ensure!(status == 403, "strict: status {status}");
    ensure!(site.content_requests().is_empty(), "strict: origin saw {:?}", site.content_requests());
    ensure!(!page.windows(16).any(|w| w == &body[..16]), "strict: upstream bytes in response");

    let relaxed = agent(|c| c.ruleset = "preset:relaxed".into()).await;
    let site = Site::with_policy(&no_seal, &body).await;
    let resp = relaxed.browser.get(site.url("/")).send().await.unwrap();
    let status = resp.status().as_u16();
    let got = resp.bytes().await.unwrap();
    ensure!(status == 200, "relaxed: status {status}");
    ensure!(got.as_ref() == body.as_slice(), "relaxed: body differs ({} vs {} bytes)", got.len(), body.len());
    Ok(format!("strict: 403, 0 upstream requests; relaxed: {} bytes identical", body.len()))
}

async fn prompt_lifecycle() -> Outcome {
    let h = agent(|c| c.overrides = Some("choices.ovr".into())).await;
    let site = Site::with_policy(&corpus_policy("05"), b"held\n").await;
    let b = h.browser.clone();
    let url = site.url("/");
    let req = tokio::spawn(async move { b.get(url).send().await.unwrap().status().as_u16() });
    let id = h.wait_for_prompt(&site.origin()).await;
    ensure!(site.content_requests().is_empty(), "request was not held");
    let (code, _) = h.resolve(&id, "allow", "persistent").await;
    ensure!(code == 200, "resolve returned {code}");
    ensure!(req.await.unwrap() == 200, "allowed request not forwarded");

    let status = h.browser.get(site.url("/")).send().await.unwrap().status().as_u16();
    ensure!(status == 200, "second visit: {status}");
    ensure!(h.agent().pending_prompts().is_empty(), "second visit prompted");
    let saved = std::fs::read_to_string(h.dir.path().join("choices.ovr")).unwrap();
    ensure!(saved.contains(&site.origin()), "override not saved:\n{saved}");

    // a restarted agent reads the override back
    let again = agent_with(&[("choices.ovr", &saved)], |c| c.overrides = Some("choices.ovr".into())).await;
    let status = again.browser.get(site.url("/")).send().await.unwrap().status().as_u16();
    ensure!(status == 200 && again.agent().pending_prompts().is_empty(), "after restart: {status}");

    let timed = agent(|c| c.warn_timeout = 30).await;
    let site = Site::with_policy(&corpus_policy("13"), b"never\n").await;
    let start = Instant::now();
    let resp = timed.browser.get(site.url("/")).send().await.unwrap();
    let took = start.elapsed();
    let status = resp.status().as_u16();
    let marker = resp.headers().get("x-privacy-decision").and_then(|v| v.to_str().ok()).map(String::from);
    ensure!(status == 403, "unanswered prompt: status {status}");
    ensure!(marker.as_deref() == Some("block; timed-out"), "marker {marker:?}");
    ensure!(
        (28.0..=32.0).contains(&took.as_secs_f64()),
        "timed out after {:.2}s",
        took.as_secs_f64()
    );
    ensure!(site.content_requests().is_empty(), "timed-out request reached origin");
    Ok(format!("held, allowed, remembered; unanswered prompt blocked after {:.2}s", took.as_secs_f64()))
}

async fn indicators() -> Outcome {
    let h = agent(|_| {}).await;
    let site = Site::with_policy(&corpus_policy("01"), b"").await;
    site.route("/", Reply::ok("welcome\n").header("set-cookie", "session=1; Path=/"));
    for path in ["/", "/about"] {
        h.browser.get(site.url(path)).send().await.unwrap();
    }
    let (code, list) = h.get_json("/api/status").await;
    ensure!(code == 200, "/api/status returned {code}");
    let s = list
        .as_array()
        .and_then(|l| l.iter().find(|s| s["origin"] == site.origin()))
        .ok_or("fixture origin missing from status")?;
    ensure!(s["policy_enabled"] == true, "policy_enabled {}", s["policy_enabled"]);
    ensure!(s["cookies_seen"] == true, "cookies_seen {}", s["cookies_seen"]);
    ensure!(s["seals"] == serde_json::json!(["TRUSTe"]), "seals {}", s["seals"]);
    ensure!(
        s["disclosure_uri"].as_str().is_some_and(|u| !u.is_empty()),
        "disclosure_uri {}",
        s["disclosure_uri"]
    );
    Ok(format!("policy-enabled, cookies-seen, seals [\"TRUSTe\"], disclosure {}", s["disclosure_uri"]))
}

fn main() -> ExitCode {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    let results: Vec<(&str, Outcome)> = rt.block_on(async {
        // the 30 s timeout dominates; run it alongside everything else
        let lifecycle = tokio::spawn(guarded_async(prompt_lifecycle()));
        let mut out = vec![
            ("four-action completeness", guarded_async(four_actions()).await),
            ("oracle corpus", guarded(oracle_corpus)),
            ("exhaustive small-instance equivalence", guarded(exhaustive)),
            ("round-trip fuzzing", tokio::task::spawn_blocking(|| guarded(round_trip)).await.unwrap()),
            ("coupling law", guarded(coupling)),
            ("enforcement soundness", guarded_async(soundness()).await),
        ];
        out.push(("prompt lifecycle", lifecycle.await.unwrap()));
        out.push(("indicator semantics", guarded_async(indicators()).await));
        out
    });
    let mut failed = 0;
    for (name, result) in &results {
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
