use chrono::{DateTime, Utc};
use serde::Serialize;

use crate::extract::LinkInventory;
use crate::ids::ContextId;
use crate::leakage::{Gate, LeakageLedger, ThresholdConfig};
use crate::url::AbsoluteUrl;

/// A request as seen by the filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProxyRequest {
    pub method: String,
    pub url: AbsoluteUrl,
    /// Parsed `Referer` header; unparseable values are dropped.
    pub referrer: Option<AbsoluteUrl>,
    /// Header name/value pairs in wire order.
    pub headers: Vec<(String, String)>,
}

impl ProxyRequest {
    pub fn get(url: AbsoluteUrl) -> Self {
        ProxyRequest {
            method: "GET".to_owned(),
            url,
            referrer: None,
            headers: Vec::new(),
        }
    }

    pub fn with_referrer(mut self, referrer: AbsoluteUrl) -> Self {
        self.referrer = Some(referrer);
        self
    }

    pub fn with_header(mut self, name: &str, value: &str) -> Self {
        if name.eq_ignore_ascii_case("referer") {
            self.referrer = AbsoluteUrl::parse(value).ok();
        }
        self.headers.push((name.to_owned(), value.to_owned()));
        self
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    /// GET whose `Accept` header lists `text/html` ahead of any other type.
    pub fn looks_like_navigation(&self) -> bool {
        if !self.method.eq_ignore_ascii_case("GET") {
            return false;
        }
        let Some(accept) = self.header("accept") else {
            return false;
        };
        accept
            .split(',')
            .next()
            .map(|first| first.split(';').next().unwrap_or("").trim())
            .is_some_and(|t| t.eq_ignore_ascii_case("text/html"))
    }
}

/// Filter state for one top-level page: its static links and how many of the
/// external ones have been requested.
#[derive(Debug, Clone)]
pub struct PageContext {
    pub id: ContextId,
    pub page_url: AbsoluteUrl,
    pub inventory: LinkInventory,
    pub ledger: LeakageLedger,
    pub created_at: DateTime<Utc>,
}

impl PageContext {
    pub fn new(id: ContextId, page_url: AbsoluteUrl) -> Self {
        PageContext {
            id,
            inventory: LinkInventory::new(page_url.clone()),
            page_url,
            ledger: LeakageLedger::new(0),
            created_at: Utc::now(),
        }
    }

    /// Adds newly discovered static links; returns the external links that
    /// were not known before.
    pub fn absorb(&mut self, inventory: LinkInventory) -> Vec<AbsoluteUrl> {
        let added = self.inventory.merge(inventory);
        self.ledger.set_n(self.inventory.n() as u64);
        added
    }

    /// Meters a request for one of this page's static external links.
    /// Links outside the inventory are never recorded.
    pub fn meter(&mut self, link: &AbsoluteUrl, cfg: &ThresholdConfig) -> Gate {
        if !self.inventory.is_external_link(link) {
            return Gate::Deny;
        }
        self.ledger.record_and_check(link, cfg)
    }

    pub fn snapshot(&self, threshold: &ThresholdConfig) -> ContextSnapshot {
        ContextSnapshot {
            context_id: self.id,
            page_url: self.page_url.clone(),
            n: self.inventory.n() as u64,
            r: self.ledger.r(),
            bits: self.ledger.bits(),
            threshold: threshold.max_bits,
            local_links: self.inventory.local_links.len() as u64,
            frames: self.inventory.frames.iter().cloned().collect(),
            followed: self.ledger.followed().iter().cloned().collect(),
            created_at: self.created_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContextSnapshot {
    pub context_id: ContextId,
    pub page_url: AbsoluteUrl,
    pub n: u64,
    pub r: u64,
    pub bits: u64,
    pub threshold: u64,
    pub local_links: u64,
    pub frames: Vec<AbsoluteUrl>,
    pub followed: Vec<AbsoluteUrl>,
    pub created_at: DateTime<Utc>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::extract_static_links;

    fn url(s: &str) -> AbsoluteUrl {
        AbsoluteUrl::parse(s).unwrap()
    }

    #[test]
    fn unparseable_referer_is_absent() {
        let req = ProxyRequest::get(url("http://a.example/x")).with_header("Referer", "not a url");
        assert!(req.referrer.is_none());
        let req = ProxyRequest::get(url("http://a.example/x")).with_header("referer", "http://b.example/");
        assert_eq!(req.referrer, Some(url("http://b.example/")));
    }

    #[test]
    fn navigation_heuristic() {
        let nav = ProxyRequest::get(url("http://a.example/"))
            .with_header("Accept", "text/html,application/xhtml+xml;q=0.9,*/*;q=0.8");
        assert!(nav.looks_like_navigation());
        let img = ProxyRequest::get(url("http://a.example/i.png")).with_header("Accept", "image/avif,image/*");
        assert!(!img.looks_like_navigation());
        let mut post = nav.clone();
        post.method = "POST".into();
        assert!(!post.looks_like_navigation());
    }

    #[test]
    fn ledger_never_meters_links_outside_inventory() {
        let page = url("http://site.example/");
        let mut ctx = PageContext::new(ContextId(1), page.clone());
        ctx.absorb(extract_static_links(b"<img src=http://evil1.com/a.jpg>", &page));
        let cfg = ThresholdConfig::default();
        assert_eq!(ctx.meter(&url("http://evil9.com/x"), &cfg), Gate::Deny);
        assert_eq!(ctx.meter(&url("http://evil1.com/a.jpg"), &cfg), Gate::Allow);
        assert_eq!(ctx.ledger.r(), 1);
        assert!(ctx.ledger.r() <= ctx.inventory.n() as u64);
    }
}
