//! A script on a page with eight external images tries to signal a value by
//! requesting them in a chosen order. With an 11-bit budget only four get
//! through.
//!
//!     cargo run --example multi_domain_attack -- 11

use xss_shield::gateway::context::ProxyRequest;
use xss_shield::shield::ResponseOrigin;
use xss_shield::{AbsoluteUrl, Config, Shield};

pub fn main() {
    run(std::env::args().skip(1));
}

pub fn run(mut args: impl Iterator<Item = String>) {
    let threshold: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(11);
    let shield = Shield::new(Config::default().with_threshold(threshold)).expect("no rules file");

    let page = AbsoluteUrl::parse("http://site.local/guestbook").unwrap();
    let links: Vec<AbsoluteUrl> = ["a", "e", "b", "f", "c", "g", "d", "h"]
        .iter()
        .enumerate()
        .map(|(i, f)| AbsoluteUrl::parse(&format!("http://evil{}.com/{f}.jpg", i + 1)).unwrap())
        .collect();
    let doc: String = links.iter().map(|l| format!("<img src = {l}>\n")).collect();

    // The browser navigates to the page; the proxy sees the HTML response.
    let nav = shield.evaluate(&ProxyRequest::get(page.clone()));
    let outcome = shield.process_html(
        &ResponseOrigin {
            url: page.clone(),
            referrer: None,
            navigation_context: nav.navigation_context,
        },
        doc.as_bytes(),
        None,
    );
    println!("page context {} holds n = {} static external links", outcome.context, outcome.n);

    // The injected script requests the images in an attacker-chosen order.
    for link in &links {
        let eval = shield.evaluate(&ProxyRequest::get(link.clone()).with_referrer(page.clone()));
        let ctx = shield.context(outcome.context).unwrap();
        println!(
            "{:<26} {:<8} {:<18} r = {} bits = {}",
            link.as_str(),
            format!("{:?}", eval.action.kind),
            eval.action.reason.to_string(),
            ctx.r,
            ctx.bits
        );
    }
}
