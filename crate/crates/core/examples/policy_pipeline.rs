//! Walks requests from one page through the decision pipeline without any
//! networking.

use xss_shield::extract::extract_static_links;
use xss_shield::ids::ContextId;
use xss_shield::policy::{decide, Lifetime, NewRule, PolicyConfig, RuleAction, RuleOrigin, RulePattern, RuleStore};
use xss_shield::{AbsoluteUrl, PageContext, ProxyRequest};

fn url(s: &str) -> AbsoluteUrl {
    AbsoluteUrl::parse(s).unwrap()
}

pub fn main() {
    let page = url("http://www.site.local/guestbook");
    let doc = br#"<img src="http://cdn.example.net/logo.png"><a href="/about">about</a>"#;

    let mut ctx = PageContext::new(ContextId(1), page.clone());
    let mut store = RuleStore::new();
    ctx.absorb(extract_static_links(doc, &page));
    store.register_temporary_rules(&ctx.inventory, ctx.id);
    store
        .add(NewRule {
            pattern: RulePattern::domain("tracker.example"),
            action: RuleAction::Deny,
            lifetime: Lifetime::Permanent,
            origin: RuleOrigin::UserDecision,
        })
        .unwrap();
    let cfg = PolicyConfig::default();

    let requests = [
        ProxyRequest::get(page.clone()),
        ProxyRequest::get(url("http://static.site.local/app.js")).with_referrer(page.clone()),
        ProxyRequest::get(url("http://cdn.example.net/logo.png")).with_referrer(page.clone()),
        ProxyRequest::get(url("http://ads.tracker.example/pixel")).with_referrer(page.clone()),
        ProxyRequest::get(url("http://evil.local/steal-cookie.php?c=42")).with_referrer(page.clone()),
    ];
    for req in &requests {
        let action = decide(req, Some(&mut ctx), &store, &cfg);
        println!("{:<45} {:?} ({})", req.url.as_str(), action.kind, action.reason);
    }
    println!("\nledger: n = {}, r = {}, bits = {}", ctx.ledger.n(), ctx.ledger.r(), ctx.ledger.bits());
}
