//! Static link extraction from HTML and CSS.
//!
//! Every `href` and `src` attribute on any element, every `url(...)` token in
//! `<style>` blocks and `style` attributes, and every `url(...)` in a
//! stylesheet is resolved against the page and classified as local or
//! external by registrable domain. Frame sources are also remembered so the
//! framed document can be attributed when the browser fetches it.

pub mod css;
pub mod html;

use std::collections::BTreeSet;
use std::ops::AddAssign;

use encoding_rs::Encoding;
use serde::Serialize;

use crate::policy::is_local;
use crate::url::AbsoluteUrl;

use self::html::{Token, Tokenizer};

/// Schemes that never name a fetchable static resource.
pub const NON_FETCH_SCHEMES: &[&str] = &["javascript", "data", "mailto", "about"];

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExtractionStats {
    /// `href`/`src` attributes and `url()` operands inspected.
    pub candidates: u64,
    /// Values that did not resolve to a hosted URL.
    pub unparseable: u64,
    /// `javascript:`, `data:`, `mailto:` and `about:` links.
    pub script_bearing: u64,
    /// Malformed `url(` tokens.
    pub malformed_css: u64,
}

impl AddAssign for ExtractionStats {
    fn add_assign(&mut self, rhs: Self) {
        self.candidates += rhs.candidates;
        self.unparseable += rhs.unparseable;
        self.script_bearing += rhs.script_bearing;
        self.malformed_css += rhs.malformed_css;
    }
}

/// The distinct static links of one page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinkInventory {
    pub page_url: AbsoluteUrl,
    pub external_links: BTreeSet<AbsoluteUrl>,
    pub local_links: BTreeSet<AbsoluteUrl>,
    /// `frame`/`iframe` sources, also present in one of the sets above.
    pub frames: BTreeSet<AbsoluteUrl>,
    pub stats: ExtractionStats,
}

impl LinkInventory {
    pub fn new(page_url: AbsoluteUrl) -> Self {
        LinkInventory {
            page_url,
            external_links: BTreeSet::new(),
            local_links: BTreeSet::new(),
            frames: BTreeSet::new(),
            stats: ExtractionStats::default(),
        }
    }

    /// Number of distinct external links.
    pub fn n(&self) -> usize {
        self.external_links.len()
    }

    pub fn is_external_link(&self, url: &AbsoluteUrl) -> bool {
        self.external_links.contains(url)
    }

    /// Adds a link, classifying it against this inventory's page.
    pub fn insert(&mut self, url: AbsoluteUrl) -> bool {
        if is_local(&url, &self.page_url) {
            self.local_links.insert(url)
        } else {
            self.external_links.insert(url)
        }
    }

    /// Folds another inventory's links into this one, reclassifying them
    /// against this page. Returns the newly added external links.
    pub fn merge(&mut self, other: LinkInventory) -> Vec<AbsoluteUrl> {
        let mut added = Vec::new();
        for url in other.external_links.into_iter().chain(other.local_links) {
            if self.insert(url.clone()) && self.external_links.contains(&url) {
                added.push(url);
            }
        }
        self.frames.extend(other.frames);
        self.stats += other.stats;
        added
    }
}

enum Resolved {
    Url(AbsoluteUrl),
    NonFetch,
    Unresolvable,
}

fn resolve(base: &AbsoluteUrl, raw: &str) -> Resolved {
    match base.as_url().join(raw.trim()) {
        Ok(url) if NON_FETCH_SCHEMES.contains(&url.scheme()) => Resolved::NonFetch,
        Ok(url) => match AbsoluteUrl::from_url(url) {
            Ok(u) => Resolved::Url(u),
            Err(_) => Resolved::Unresolvable,
        },
        Err(_) => Resolved::Unresolvable,
    }
}

/// Resolves a raw attribute value against `base`. Returns `None` for
/// non-fetch schemes and anything that does not produce a hosted URL.
pub fn resolve_link(base: &AbsoluteUrl, raw: &str) -> Option<AbsoluteUrl> {
    match resolve(base, raw) {
        Resolved::Url(u) => Some(u),
        Resolved::NonFetch | Resolved::Unresolvable => None,
    }
}

/// Every `url(...)` operand in `css`, resolved against `base`.
pub fn extract_css_urls(css: &str, base: &AbsoluteUrl) -> BTreeSet<AbsoluteUrl> {
    css::scan_urls(css)
        .operands
        .iter()
        .filter_map(|op| resolve_link(base, op))
        .collect()
}

/// Builds the inventory for a stylesheet served at `stylesheet_url` and
/// owned by `page_url`.
pub fn extract_stylesheet(
    css_text: &str,
    stylesheet_url: &AbsoluteUrl,
    page_url: &AbsoluteUrl,
) -> LinkInventory {
    let mut collector = Collector::new(page_url.clone());
    collector.css(css_text, stylesheet_url);
    collector.inventory
}

/// Builds the inventory of `document`, assuming UTF-8 with a Latin-1
/// fallback.
pub fn extract_static_links(document: &[u8], base: &AbsoluteUrl) -> LinkInventory {
    extract_static_links_with_encoding(document, base, None)
}

/// Like [`extract_static_links`] with an explicit document charset.
pub fn extract_static_links_with_encoding(
    document: &[u8],
    page_url: &AbsoluteUrl,
    encoding: Option<&'static Encoding>,
) -> LinkInventory {
    let tokens: Vec<Token<'_>> = Tokenizer::new(document).collect();
    let mut collector = Collector::new(page_url.clone());
    collector.encoding = encoding;

    // The first <base href> sets the resolution base for the whole document.
    let base = tokens
        .iter()
        .find_map(|t| match t {
            Token::StartTag { name, attrs, .. } if name.eq_ignore_ascii_case(b"base") => attrs
                .iter()
                .find(|a| a.name.eq_ignore_ascii_case(b"href"))
                .and_then(|a| a.value)
                .and_then(|v| resolve_link(page_url, &collector.decode(v))),
            _ => None,
        })
        .unwrap_or_else(|| page_url.clone());

    for token in &tokens {
        match token {
            Token::StartTag { name, attrs, .. } => {
                let is_frame =
                    name.eq_ignore_ascii_case(b"frame") || name.eq_ignore_ascii_case(b"iframe");
                for attr in attrs {
                    let Some(value) = attr.value else { continue };
                    if attr.name.eq_ignore_ascii_case(b"href") || attr.name.eq_ignore_ascii_case(b"src") {
                        let raw = collector.decode(value);
                        if let Some(url) = collector.link(&base, &raw) {
                            if is_frame && attr.name.eq_ignore_ascii_case(b"src") {
                                collector.inventory.frames.insert(url);
                            }
                        }
                    } else if attr.name.eq_ignore_ascii_case(b"style") {
                        let css = collector.decode(value);
                        collector.css(&css, &base);
                    }
                }
            }
            Token::RawText { element, text, .. } if element.eq_ignore_ascii_case(b"style") => {
                // No entity decoding inside raw text.
                let css = collector.decode_raw(text);
                collector.css(&css, &base);
            }
            _ => {}
        }
    }
    collector.inventory
}

struct Collector {
    inventory: LinkInventory,
    encoding: Option<&'static Encoding>,
}

impl Collector {
    fn new(page_url: AbsoluteUrl) -> Self {
        Collector {
            inventory: LinkInventory::new(page_url),
            encoding: None,
        }
    }

    fn link(&mut self, base: &AbsoluteUrl, raw: &str) -> Option<AbsoluteUrl> {
        self.inventory.stats.candidates += 1;
        match resolve(base, raw) {
            Resolved::Url(url) => {
                self.inventory.insert(url.clone());
                Some(url)
            }
            Resolved::NonFetch => {
                self.inventory.stats.script_bearing += 1;
                None
            }
            Resolved::Unresolvable => {
                self.inventory.stats.unparseable += 1;
                None
            }
        }
    }

    fn css(&mut self, css_text: &str, base: &AbsoluteUrl) {
        let scan = css::scan_urls(css_text);
        self.inventory.stats.malformed_css += scan.malformed as u64;
        for op in &scan.operands {
            self.link(base, op);
        }
    }

    fn decode_raw(&self, bytes: &[u8]) -> String {
        match self.encoding {
            Some(enc) => enc.decode_without_bom_handling(bytes).0.into_owned(),
            None => match std::str::from_utf8(bytes) {
                Ok(s) => s.to_owned(),
                Err(_) => bytes.iter().map(|&b| b as char).collect(),
            },
        }
    }

    fn decode(&self, bytes: &[u8]) -> String {
        decode_char_refs(&self.decode_raw(bytes))
    }
}

/// Decodes numeric character references and the named references that occur
/// in URLs in practice.
pub fn decode_char_refs(s: &str) -> String {
    if !s.contains('&') {
        return s.to_owned();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        match parse_char_ref(rest) {
            Some((ch, len)) => {
                out.push(ch);
                rest = &rest[len..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn parse_char_ref(s: &str) -> Option<(char, usize)> {
    let body = &s[1..];
    if let Some(num) = body.strip_prefix('#') {
        let (digits, radix, prefix) = match num.strip_prefix(['x', 'X']) {
            Some(hex) => (hex, 16, 2),
            None => (num, 10, 1),
        };
        let len = digits.chars().take_while(|c| c.is_digit(radix)).count();
        if len == 0 {
            return None;
        }
        let code = u32::from_str_radix(&digits[..len], radix).ok()?;
        let mut consumed = 1 + prefix + len;
        if digits[len..].starts_with(';') {
            consumed += 1;
        }
        return Some((char::from_u32(code).unwrap_or('\u{fffd}'), consumed));
    }
    const NAMED: &[(&str, char)] = &[
        ("amp", '&'),
        ("lt", '<'),
        ("gt", '>'),
        ("quot", '"'),
        ("apos", '\''),
        ("nbsp", '\u{a0}'),
        ("sol", '/'),
        ("colon", ':'),
        ("lpar", '('),
        ("rpar", ')'),
        ("equals", '='),
        ("quest", '?'),
        ("num", '#'),
        ("Tab", '\t'),
        ("NewLine", '\n'),
    ];
    for (name, ch) in NAMED {
        if let Some(after) = body.strip_prefix(name) {
            if after.starts_with(';') {
                return Some((*ch, 1 + name.len() + 1));
            }
            // Legacy references without the semicolon.
            if matches!(*name, "amp" | "lt" | "gt" | "quot" | "nbsp") {
                return Some((*ch, 1 + name.len()));
            }
        }
    }
    None
}
