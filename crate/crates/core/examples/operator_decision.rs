//! An operator answers a connection alert through the management API while
//! the request waits in the proxy.
//!
//!     cargo run --example operator_decision

use std::net::SocketAddr;
use std::time::Duration;

use bytes::Bytes;
use http::Request;
use http_body_util::{BodyExt, Full};
use hyper_util::rt::TokioIo;
use serde_json::{json, Value};
use tokio::net::TcpStream;
use xss_shield::{AbsoluteUrl, Config, ProxyRequest, RunningProxy};

async fn call(addr: SocketAddr, method: &str, path: &str, body: Option<Value>) -> Value {
    let stream = TcpStream::connect(addr).await.unwrap();
    let (mut sender, conn) = hyper::client::conn::http1::handshake(TokioIo::new(stream)).await.unwrap();
    tokio::spawn(conn);
    let payload = body.map(|b| b.to_string()).unwrap_or_default();
    let req = Request::builder()
        .method(method)
        .uri(path)
        .header("host", addr.to_string())
        .header("content-type", "application/json")
        .body(Full::new(Bytes::from(payload)))
        .unwrap();
    let resp = sender.send_request(req).await.unwrap();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    serde_json::from_slice(&bytes).unwrap()
}

#[tokio::main]
pub async fn main() {
    let dir = std::env::temp_dir().join(format!("xss-shield-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut config = Config::default().ephemeral().with_alert_timeout(Duration::from_secs(10));
    config.rules_file = Some(dir.join("rules.jsonl"));
    let proxy = RunningProxy::start(config).await.expect("listeners bind");
    let shield = proxy.shield.clone();

    // A page is open and a request nobody has ruled on leaves it.
    let page = AbsoluteUrl::parse("http://www.site.local/").unwrap();
    shield.establish_page_context(page.clone());
    let req = ProxyRequest::get(AbsoluteUrl::parse("http://evil.local/steal-cookie.php?c=42").unwrap())
        .with_referrer(page);
    let held = tokio::spawn({
        let shield = shield.clone();
        async move { shield.handle_request(&req).await.0 }
    });

    let alerts = call(proxy.mgmt_addr, "GET", "/api/alerts?wait=1", None).await;
    println!("pending: {}", serde_json::to_string_pretty(&alerts["alerts"]).unwrap());
    let id = alerts["alerts"][0]["id"].as_u64().unwrap();

    let decision = json!({ "action": "deny", "scope": "permanent" });
    let answer = call(proxy.mgmt_addr, "POST", &format!("/api/alerts/{id}/decision"), Some(decision.clone())).await;
    println!("decision: {}", answer["ticket"]["state"]);
    println!("held request resolved as {:?}", held.await.unwrap());

    let again = call(proxy.mgmt_addr, "POST", &format!("/api/alerts/{id}/decision"), Some(decision)).await;
    println!("deciding twice: {}", again["error"]);
    let rules = call(proxy.mgmt_addr, "GET", "/api/rules", None).await;
    println!("rules: {}", serde_json::to_string_pretty(&rules["rules"]).unwrap());
    println!("rules file:\n{}", std::fs::read_to_string(dir.join("rules.jsonl")).unwrap());
    let _ = std::fs::remove_dir_all(&dir);
}
