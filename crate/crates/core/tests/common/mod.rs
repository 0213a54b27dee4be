#![allow(dead_code)]

pub mod golden;
pub mod oracle;
pub mod popup;

use std::collections::HashMap;
use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::Arc;

use bytes::Bytes;
use http::{HeaderMap, Method, Request, Response, StatusCode};
use http_body_util::{BodyExt, Full};
use hyper::body::Incoming;
use hyper::server::conn::http1;
use hyper::service::service_fn;
use hyper_util::rt::TokioIo;
use parking_lot::Mutex;
use serde_json::Value;
use tokio::net::{TcpListener, TcpStream};
use tokio::task::JoinHandle;

/// A canned response served by [`Origin`].
#[derive(Clone)]
pub struct Page {
    pub content_type: &'static str,
    pub body: Bytes,
    pub headers: Vec<(&'static str, String)>,
}

impl Page {
    pub fn html(body: impl Into<Bytes>) -> Page {
        Page {
            content_type: "text/html; charset=utf-8",
            body: body.into(),
            headers: Vec::new(),
        }
    }

    pub fn typed(content_type: &'static str, body: impl Into<Bytes>) -> Page {
        Page {
            content_type,
            body: body.into(),
            headers: Vec::new(),
        }
    }

    pub fn header(mut self, name: &'static str, value: impl Into<String>) -> Page {
        self.headers.push((name, value.into()));
        self
    }
}

/// Loopback HTTP server answering by `Host` and path. Unknown paths get 404
/// with a small image body so leakage probes still look like fetches.
pub struct Origin {
    pub addr: SocketAddr,
    pub hits: Arc<Mutex<Vec<String>>>,
    task: JoinHandle<()>,
}

impl Drop for Origin {
    fn drop(&mut self) {
        self.task.abort();
    }
}

pub async fn start_origin(pages: HashMap<String, Page>) -> Origin {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let pages = Arc::new(pages);
    let hits: Arc<Mutex<Vec<String>>> = Arc::default();
    let task_hits = hits.clone();
    let task = tokio::spawn(async move {
        loop {
            let Ok((stream, _)) = listener.accept().await else { continue };
            let pages = pages.clone();
            let hits = task_hits.clone();
            tokio::spawn(async move {
                let svc = service_fn(move |req: Request<Incoming>| {
                    let pages = pages.clone();
                    let hits = hits.clone();
                    async move {
                        let host = req
                            .headers()
                            .get(http::header::HOST)
                            .and_then(|h| h.to_str().ok())
                            .unwrap_or("")
                            .split(':')
                            .next()
                            .unwrap_or("")
                            .to_owned();
                        let key = format!("{host}{}", req.uri());
                        hits.lock().push(key.clone());
                        let resp = match pages.get(&key) {
                            Some(p) => {
                                let mut b = Response::builder()
                                    .status(StatusCode::OK)
                                    .header("content-type", p.content_type);
                                for (n, v) in &p.headers {
                                    b = b.header(*n, v.as_str());
                                }
                                b.body(Full::new(p.body.clone())).unwrap()
                            }
                            None => Response::builder()
                                .status(StatusCode::NOT_FOUND)
                                .header("content-type", "image/gif")
                                .body(Full::new(Bytes::from_static(b"GIF89a")))
                                .unwrap(),
                        };
                        Ok::<_, Infallible>(resp)
                    }
                });
                let _ = http1::Builder::new()
                    .serve_connection(TokioIo::new(stream), svc)
                    .await;
            });
        }
    });
    Origin { addr, hits, task }
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: Bytes,
}

impl Reply {
    pub fn reason(&self) -> Option<&str> {
        self.headers
            .get(xss_shield::gateway::FILTER_REASON_HEADER)
            .and_then(|v| v.to_str().ok())
    }
}

async fn send(addr: SocketAddr, req: Request<Full<Bytes>>) -> Reply {
    let stream = TcpStream::connect(addr).await.unwrap();
    let (mut sender, conn) = hyper::client::conn::http1::handshake(TokioIo::new(stream))
        .await
        .unwrap();
    tokio::spawn(conn);
    let resp = sender.send_request(req).await.unwrap();
    let (parts, body) = resp.into_parts();
    let body = body.collect().await.unwrap().to_bytes();
    Reply {
        status: parts.status,
        headers: parts.headers,
        body,
    }
}

/// GET `url` through the proxy in absolute form.
pub async fn proxy_get(proxy: SocketAddr, url: &str, referer: Option<&str>) -> Reply {
    proxy_get_with(proxy, url, referer, &[]).await
}

pub async fn proxy_get_with(
    proxy: SocketAddr,
    url: &str,
    referer: Option<&str>,
    headers: &[(&str, &str)],
) -> Reply {
    let uri: http::Uri = url.parse().unwrap();
    let mut b = Request::builder()
        .method(Method::GET)
        .uri(url)
        .header("host", uri.authority().unwrap().as_str());
    if let Some(r) = referer {
        b = b.header("referer", r);
    }
    for (n, v) in headers {
        b = b.header(*n, *v);
    }
    send(proxy, b.body(Full::new(Bytes::new())).unwrap()).await
}

/// JSON call against the management API.
pub async fn api(mgmt: SocketAddr, method: &str, path: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut b = Request::builder()
        .method(method)
        .uri(path)
        .header("host", mgmt.to_string());
    let payload = match body {
        Some(v) => {
            b = b.header("content-type", "application/json");
            Bytes::from(serde_json::to_vec(&v).unwrap())
        }
        None => Bytes::new(),
    };
    let reply = send(mgmt, b.body(Full::new(payload)).unwrap()).await;
    let json = serde_json::from_slice(&reply.body).unwrap_or(Value::Null);
    (reply.status, json)
}

/// The attack page: eight external images with spaced `src =` attributes.
pub fn attack_page() -> String {
    let mut doc = String::from("<html><head><title>guestbook</title></head><body>\n");
    for (i, f) in ["a", "e", "b", "f", "c", "g", "d", "h"].iter().enumerate() {
        doc.push_str(&format!("<img src = http://evil{}.com/{f}.jpg>\n", i + 1));
    }
    doc.push_str("</body></html>\n");
    doc
}

pub fn attack_links() -> Vec<String> {
    ["a", "e", "b", "f", "c", "g", "d", "h"]
        .iter()
        .enumerate()
        .map(|(i, f)| format!("http://evil{}.com/{f}.jpg", i + 1))
        .collect()
}
