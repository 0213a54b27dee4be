//! The HTTP/1.1 forward proxy.
//!
//! Each request is decided by the [`Shield`]; forwarded requests go upstream
//! over a fresh connection and HTML/CSS responses are buffered and rewritten.
//! `CONNECT` tunnels are spliced through without inspection.

pub mod context;
pub mod response;

use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::Arc;

use bytes::Bytes;
use futures_util::StreamExt;
use http::header::{self, HeaderName, HeaderValue};
use http::{Method, Request, Response, StatusCode, Uri};
use http_body_util::combinators::BoxBody;
use http_body_util::{BodyExt, BodyStream, Empty, Full, StreamBody};
use hyper::body::{Frame, Incoming};
use hyper::server::conn::http1;
use hyper::service::service_fn;
use hyper_util::rt::TokioIo;
use tokio::net::{TcpListener, TcpStream};
use tokio::task::JoinHandle;

use crate::config::Config;
use crate::error::ServerError;
use crate::policy::{registrable_domain, ActionKind, ProxyAction};
use crate::shield::{ResponseOrigin, Shield};
use crate::url::AbsoluteUrl;

use self::context::ProxyRequest;
use self::response::{classify, process_response, ContentClass};

pub type BoxError = Box<dyn std::error::Error + Send + Sync>;
pub type ProxyBody = BoxBody<Bytes, BoxError>;

/// Header carrying the reason token on denied requests.
pub const FILTER_REASON_HEADER: &str = "x-filter-reason";

const HOP_BY_HOP: &[&str] = &[
    "connection",
    "proxy-connection",
    "keep-alive",
    "proxy-authenticate",
    "proxy-authorization",
    "te",
    "trailer",
    "transfer-encoding",
    "upgrade",
];

fn full(body: impl Into<Bytes>) -> ProxyBody {
    Full::new(body.into()).map_err(|never| match never {}).boxed()
}

fn empty() -> ProxyBody {
    Empty::new().map_err(|never| match never {}).boxed()
}

fn text_response(status: StatusCode, msg: &str) -> Response<ProxyBody> {
    let mut resp = Response::new(full(format!("{msg}\n")));
    *resp.status_mut() = status;
    resp.headers_mut()
        .insert(header::CONTENT_TYPE, HeaderValue::from_static("text/plain; charset=utf-8"));
    resp
}

/// 403 with the machine-readable reason header.
pub fn deny_response(action: ProxyAction) -> Response<ProxyBody> {
    let mut resp = text_response(
        StatusCode::FORBIDDEN,
        &format!("request blocked by xss-shield: {}", action.reason),
    );
    resp.headers_mut().insert(
        HeaderName::from_static(FILTER_REASON_HEADER),
        HeaderValue::from_static(action.reason.token()),
    );
    resp
}

fn strip_hop_by_hop(headers: &mut http::HeaderMap) {
    let named: Vec<String> = headers
        .get_all(header::CONNECTION)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(','))
        .map(|s| s.trim().to_ascii_lowercase())
        .filter(|s| !s.is_empty())
        .collect();
    for name in HOP_BY_HOP.iter().copied().chain(named.iter().map(String::as_str)) {
        headers.remove(name);
    }
}

/// Upstream socket address for `host:port`, honoring configured overrides.
async fn resolve_upstream(config: &Config, host: &str, port: u16) -> std::io::Result<SocketAddr> {
    let host = host.trim_start_matches('[').trim_end_matches(']').to_ascii_lowercase();
    if let Some(addr) = config
        .upstream_overrides
        .get(&host)
        .or_else(|| config.upstream_overrides.get(registrable_domain(&host).as_str()))
    {
        return Ok(*addr);
    }
    let mut addrs = tokio::net::lookup_host((host.as_str(), port)).await?;
    addrs
        .next()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::NotFound, format!("no address for {host}")))
}

/// Parses the `Referer` header, dropping values that are not absolute URLs.
fn referrer_of(headers: &http::HeaderMap) -> Option<AbsoluteUrl> {
    headers
        .get(header::REFERER)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| AbsoluteUrl::parse(v).ok())
}

async fn handle(shield: Arc<Shield>, req: Request<Incoming>) -> Result<Response<ProxyBody>, Infallible> {
    if req.method() == Method::CONNECT {
        return Ok(tunnel(shield, req));
    }
    let url = match req.uri().scheme().and(req.uri().host()) {
        Some(_) => AbsoluteUrl::parse(&req.uri().to_string()),
        None => {
            return Ok(text_response(
                StatusCode::BAD_REQUEST,
                "this is a forward proxy; send absolute-form requests",
            ))
        }
    };
    let url = match url {
        Ok(u) => u,
        Err(e) => return Ok(text_response(StatusCode::BAD_REQUEST, &e.to_string())),
    };

    let preq = ProxyRequest {
        method: req.method().as_str().to_owned(),
        url: url.clone(),
        referrer: referrer_of(req.headers()),
        headers: req
            .headers()
            .iter()
            .map(|(n, v)| (n.as_str().to_owned(), String::from_utf8_lossy(v.as_bytes()).into_owned()))
            .collect(),
    };
    let (action, navigation_context) = shield.handle_request(&preq).await;
    tracing::info!(method = %preq.method, url = %url, action = ?action.kind, reason = %action.reason, "decision");
    if action.kind != ActionKind::Forward {
        return Ok(deny_response(action));
    }

    let origin = ResponseOrigin {
        url,
        referrer: preq.referrer,
        navigation_context,
    };
    match forward(&shield, req, &origin).await {
        Ok(resp) => Ok(resp),
        Err(e) => {
            tracing::warn!(url = %origin.url, error = %e, "upstream failure");
            shield.record(|c| c.upstream_errors += 1);
            Ok(text_response(StatusCode::BAD_GATEWAY, &format!("upstream error: {e}")))
        }
    }
}

async fn forward(
    shield: &Shield,
    req: Request<Incoming>,
    origin: &ResponseOrigin,
) -> Result<Response<ProxyBody>, BoxError> {
    let url = &origin.url;
    if url.scheme() != "http" {
        return Err(format!("scheme {} is only supported through CONNECT", url.scheme()).into());
    }
    let is_head = req.method() == Method::HEAD;
    let (mut parts, body) = req.into_parts();
    strip_hop_by_hop(&mut parts.headers);
    parts.uri = url.request_target().parse::<Uri>()?;
    parts.version = http::Version::HTTP_11;
    parts
        .headers
        .insert(header::HOST, HeaderValue::from_str(&url.authority())?);
    // Only codings the rewriter can undo.
    if parts.headers.contains_key(header::ACCEPT_ENCODING) {
        parts
            .headers
            .insert(header::ACCEPT_ENCODING, HeaderValue::from_static("gzip, deflate"));
    }
    let upstream_req = Request::from_parts(parts, body);

    let addr = resolve_upstream(shield.config(), url.host(), url.port()).await?;
    let stream = TcpStream::connect(addr).await?;
    let (mut sender, conn) = hyper::client::conn::http1::handshake(TokioIo::new(stream)).await?;
    tokio::spawn(async move {
        if let Err(e) = conn.await {
            tracing::debug!(error = %e, "upstream connection closed");
        }
    });
    let resp = sender.send_request(upstream_req).await?;
    let (mut parts, body) = resp.into_parts();
    strip_hop_by_hop(&mut parts.headers);

    let bodyless = is_head
        || parts.status == StatusCode::NO_CONTENT
        || parts.status == StatusCode::NOT_MODIFIED
        || parts.status.is_informational();
    if bodyless || classify(&parts.headers) == ContentClass::Other {
        let body = body.map_err(BoxError::from).boxed();
        return Ok(Response::from_parts(parts, body));
    }

    let limit = shield.config().max_body_bytes;
    let declared = parts
        .headers
        .get(header::CONTENT_LENGTH)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<usize>().ok());
    if declared.is_some_and(|len| len > limit) {
        tracing::warn!(url = %url, limit, "oversized document passed through un-rewritten");
        shield.record(|c| c.oversized += 1);
        return Ok(Response::from_parts(parts, body.map_err(BoxError::from).boxed()));
    }
    match buffer_limited(body, limit).await? {
        Buffered::Complete(bytes) => {
            let rewritten = process_response(shield, origin, Response::from_parts(parts, bytes));
            Ok(rewritten.map(full))
        }
        Buffered::Oversized(body) => {
            tracing::warn!(url = %url, limit, "oversized document passed through un-rewritten");
            shield.record(|c| c.oversized += 1);
            Ok(Response::from_parts(parts, body))
        }
    }
}

enum Buffered {
    Complete(Bytes),
    /// Limit exceeded; the already-read prefix is chained back in front of
    /// the rest of the stream.
    Oversized(ProxyBody),
}

async fn buffer_limited(mut body: Incoming, limit: usize) -> Result<Buffered, BoxError> {
    let mut chunks: Vec<Bytes> = Vec::new();
    let mut size = 0usize;
    while let Some(frame) = body.frame().await {
        let Ok(data) = frame?.into_data() else {
            continue;
        };
        size += data.len();
        chunks.push(data);
        if size > limit {
            let prefix = futures_util::stream::iter(chunks.into_iter().map(|b| Ok::<_, BoxError>(Frame::data(b))));
            let rest = BodyStream::new(body).map(|f| f.map_err(BoxError::from));
            return Ok(Buffered::Oversized(BodyExt::boxed(StreamBody::new(prefix.chain(rest)))));
        }
    }
    let mut buf = Vec::with_capacity(size);
    for chunk in chunks {
        buf.extend_from_slice(&chunk);
    }
    Ok(Buffered::Complete(Bytes::from(buf)))
}

fn tunnel(shield: Arc<Shield>, req: Request<Incoming>) -> Response<ProxyBody> {
    let Some(authority) = req.uri().authority().cloned() else {
        return text_response(StatusCode::BAD_REQUEST, "CONNECT needs host:port");
    };
    shield.record(|c| c.tunnels += 1);
    tokio::spawn(async move {
        let port = authority.port_u16().unwrap_or(443);
        let target = match resolve_upstream(shield.config(), authority.host(), port).await {
            Ok(addr) => addr,
            Err(e) => {
                tracing::warn!(%authority, error = %e, "tunnel target unresolved");
                return;
            }
        };
        match hyper::upgrade::on(req).await {
            Ok(upgraded) => {
                let mut client = TokioIo::new(upgraded);
                match TcpStream::connect(target).await {
                    Ok(mut server) => {
                        let _ = tokio::io::copy_bidirectional(&mut client, &mut server).await;
                    }
                    Err(e) => tracing::warn!(%authority, error = %e, "tunnel connect failed"),
                }
            }
            Err(e) => tracing::warn!(error = %e, "tunnel upgrade failed"),
        }
    });
    Response::new(empty())
}

/// Accepts proxy connections on `listener` until the task is aborted.
pub async fn serve(listener: TcpListener, shield: Arc<Shield>) {
    loop {
        let (stream, peer) = match listener.accept().await {
            Ok(conn) => conn,
            Err(e) => {
                tracing::warn!(error = %e, "accept failed");
                continue;
            }
        };
        let shield = shield.clone();
        tokio::spawn(async move {
            let service = service_fn(move |req| handle(shield.clone(), req));
            if let Err(e) = http1::Builder::new()
                .preserve_header_case(true)
                .serve_connection(TokioIo::new(stream), service)
                .with_upgrades()
                .await
            {
                tracing::debug!(%peer, error = %e, "client connection ended");
            }
        });
    }
}

/// A proxy and its management API, running on the current runtime.
/// Dropping it stops both listeners.
pub struct RunningProxy {
    pub shield: Arc<Shield>,
    pub proxy_addr: SocketAddr,
    pub mgmt_addr: SocketAddr,
    tasks: Vec<JoinHandle<()>>,
}

impl RunningProxy {
    /// Binds both listeners and starts serving.
    pub async fn start(config: Config) -> Result<RunningProxy, ServerError> {
        let shield = Arc::new(Shield::new(config)?);
        RunningProxy::start_with(shield).await
    }

    pub async fn start_with(shield: Arc<Shield>) -> Result<RunningProxy, ServerError> {
        let config = shield.config();
        let bind = |addr: SocketAddr| async move {
            TcpListener::bind(addr).await.map_err(|source| ServerError::Bind {
                addr: addr.to_string(),
                source,
            })
        };
        let proxy = bind(config.listen).await?;
        let mgmt = bind(config.mgmt_listen).await?;
        let proxy_addr = proxy.local_addr().expect("bound");
        let mgmt_addr = mgmt.local_addr().expect("bound");
        let tasks = vec![
            tokio::spawn(serve(proxy, shield.clone())),
            tokio::spawn(crate::mgmt::serve(mgmt, shield.clone())),
        ];
        tracing::info!(%proxy_addr, %mgmt_addr, "listening");
        Ok(RunningProxy {
            shield,
            proxy_addr,
            mgmt_addr,
            tasks,
        })
    }

    /// Runs until both listeners stop.
    pub async fn wait(mut self) {
        for task in self.tasks.drain(..) {
            let _ = task.await;
        }
    }
}

impl Drop for RunningProxy {
    fn drop(&mut self) {
        for task in &self.tasks {
            task.abort();
        }
    }
}
