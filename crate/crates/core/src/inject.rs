//! Control script injection.
//!
//! Every proxied HTML page gets a self-contained script right after its
//! `<head>` tag. The script clears `window.name` in pop-ups opened by a
//! foreign origin (the channel a pop-up attack uses to carry cookies out) and
//! only loads a frame target taken from the query string when it has no
//! scheme.

use std::sync::OnceLock;

use crate::extract::html::{Token, Tokenizer};

/// Attribute that tags the injected script element.
pub const MARKER: &str = "data-xss-shield-control";

const CONTROL_SCRIPT: &str = include_str!("../assets/control.js");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InjectionPayload {
    pub marker: &'static str,
    /// Browser-side source.
    pub source: &'static str,
    /// Complete `<script>` element as inserted.
    pub element: String,
}

pub fn build_payload() -> InjectionPayload {
    InjectionPayload {
        marker: MARKER,
        source: CONTROL_SCRIPT,
        element: format!(r#"<script type="text/javascript" {MARKER}="v1">{CONTROL_SCRIPT}</script>"#),
    }
}

/// The payload element bytes, built once.
pub fn payload_bytes() -> &'static [u8] {
    static PAYLOAD: OnceLock<String> = OnceLock::new();
    PAYLOAD.get_or_init(|| build_payload().element).as_bytes()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InjectionPoint {
    /// Right after the first `<head ...>` tag.
    AfterHead(usize),
    /// Right before the first `<body ...>` tag.
    BeforeBody(usize),
    Start,
}

impl InjectionPoint {
    pub fn offset(self) -> usize {
        match self {
            InjectionPoint::AfterHead(at) | InjectionPoint::BeforeBody(at) => at,
            InjectionPoint::Start => 0,
        }
    }
}

/// Where the payload goes in `document`.
pub fn injection_point(document: &[u8]) -> InjectionPoint {
    let mut body = None;
    for token in Tokenizer::new(document) {
        if let Token::StartTag { name, start, end, .. } = token {
            if name.eq_ignore_ascii_case(b"head") {
                return InjectionPoint::AfterHead(end);
            }
            if body.is_none() && name.eq_ignore_ascii_case(b"body") {
                body = Some(start);
            }
        }
    }
    body.map_or(InjectionPoint::Start, InjectionPoint::BeforeBody)
}

/// Whether the payload already sits at the injection point.
pub fn is_injected(document: &[u8]) -> bool {
    let payload = payload_bytes();
    match injection_point(document) {
        InjectionPoint::AfterHead(at) => document[at..].starts_with(payload),
        InjectionPoint::BeforeBody(at) => document[..at].ends_with(payload),
        InjectionPoint::Start => document.starts_with(payload),
    }
}

/// Inserts the control script. Injecting an already injected document
/// returns it unchanged.
pub fn inject(document: &[u8]) -> Vec<u8> {
    if is_injected(document) {
        return document.to_vec();
    }
    let payload = payload_bytes();
    let at = injection_point(document).offset();
    let mut out = Vec::with_capacity(document.len() + payload.len());
    out.extend_from_slice(&document[..at]);
    out.extend_from_slice(payload);
    out.extend_from_slice(&document[at..]);
    out
}
