//! Response rewriting on fully buffered bodies.

use std::io::Read;

use bytes::Bytes;
use encoding_rs::Encoding;
use flate2::read::{DeflateDecoder, GzDecoder, ZlibDecoder};
use http::header::{self, HeaderMap, HeaderValue};
use http::Response;

use crate::inject;
use crate::shield::{ResponseOrigin, Shield};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContentClass {
    Html,
    Css,
    Other,
}

/// Classifies by `Content-Type` media type.
pub fn classify(headers: &HeaderMap) -> ContentClass {
    let Some(ct) = headers.get(header::CONTENT_TYPE).and_then(|v| v.to_str().ok()) else {
        return ContentClass::Other;
    };
    let media = ct.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
    match media.as_str() {
        "text/html" | "application/xhtml+xml" => ContentClass::Html,
        "text/css" => ContentClass::Css,
        _ => ContentClass::Other,
    }
}

/// Encoding named by the `charset` parameter, if recognized.
pub fn charset(headers: &HeaderMap) -> Option<&'static Encoding> {
    let ct = headers.get(header::CONTENT_TYPE)?.to_str().ok()?;
    ct.split(';').skip(1).find_map(|param| {
        let (name, value) = param.split_once('=')?;
        if !name.trim().eq_ignore_ascii_case("charset") {
            return None;
        }
        Encoding::for_label(value.trim().trim_matches('"').as_bytes())
    })
}

#[derive(Debug, thiserror::Error)]
pub enum DecodeError {
    #[error("unsupported content-encoding {0:?}")]
    Unsupported(String),
    #[error("corrupt {encoding} body: {source}")]
    Corrupt {
        encoding: String,
        #[source]
        source: std::io::Error,
    },
}

/// Undoes `Content-Encoding`. Returns `None` for identity bodies.
pub fn decode_content(headers: &HeaderMap, body: &[u8]) -> Result<Option<Vec<u8>>, DecodeError> {
    let Some(value) = headers.get(header::CONTENT_ENCODING) else {
        return Ok(None);
    };
    let codings: Vec<String> = value
        .to_str()
        .unwrap_or("")
        .split(',')
        .map(|c| c.trim().to_ascii_lowercase())
        .filter(|c| !c.is_empty() && c != "identity")
        .collect();
    if codings.is_empty() {
        return Ok(None);
    }
    let mut data = body.to_vec();
    // Codings are listed in the order they were applied.
    for coding in codings.iter().rev() {
        let mut out = Vec::new();
        let result = match coding.as_str() {
            "gzip" | "x-gzip" => GzDecoder::new(&data[..]).read_to_end(&mut out),
            "deflate" => {
                // Servers disagree on zlib-wrapped vs raw deflate.
                let zlib = ZlibDecoder::new(&data[..]).read_to_end(&mut out);
                match zlib {
                    Ok(n) => Ok(n),
                    Err(_) => {
                        out.clear();
                        DeflateDecoder::new(&data[..]).read_to_end(&mut out)
                    }
                }
            }
            other => return Err(DecodeError::Unsupported(other.to_owned())),
        };
        result.map_err(|source| DecodeError::Corrupt {
            encoding: coding.clone(),
            source,
        })?;
        data = out;
    }
    Ok(Some(data))
}

/// Rewrites a buffered response.
///
/// HTML gets its static links registered with the page's context and the
/// control script injected; CSS gets its `url()` links registered. Compressed
/// HTML and CSS are served decompressed. Any other content, and any body that
/// fails to decompress, passes through untouched.
pub fn process_response(shield: &Shield, origin: &ResponseOrigin, resp: Response<Bytes>) -> Response<Bytes> {
    let class = classify(resp.headers());
    if class == ContentClass::Other {
        return resp;
    }
    let (mut parts, body) = resp.into_parts();
    let decoded = match decode_content(&parts.headers, &body) {
        Ok(decoded) => decoded,
        Err(e) => {
            tracing::warn!(url = %origin.url, error = %e, "passing response through unmodified");
            shield.record(|c| c.decode_failures += 1);
            return Response::from_parts(parts, body);
        }
    };
    let was_encoded = decoded.is_some();
    let plain = decoded.map(Bytes::from).unwrap_or(body);

    let out = match class {
        ContentClass::Html => {
            let outcome = shield.process_html(origin, &plain, charset(&parts.headers));
            tracing::debug!(url = %origin.url, context = %outcome.context, n = outcome.n, "analyzed page");
            if shield.config().inject {
                shield.record(|c| c.injected += 1);
                Bytes::from(inject::inject(&plain))
            } else {
                plain
            }
        }
        ContentClass::Css => {
            let text = match charset(&parts.headers) {
                Some(enc) => enc.decode_without_bom_handling(&plain).0.into_owned(),
                None => String::from_utf8_lossy(&plain).into_owned(),
            };
            shield.process_css(origin, &text);
            plain
        }
        ContentClass::Other => unreachable!(),
    };

    if was_encoded {
        parts.headers.remove(header::CONTENT_ENCODING);
    }
    parts.headers.remove(header::TRANSFER_ENCODING);
    parts.headers.insert(header::CONTENT_LENGTH, HeaderValue::from(out.len()));
    Response::from_parts(parts, out)
}
