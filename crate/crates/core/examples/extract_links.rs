//! Builds the static link inventory of an HTML document.
//!
//!     cargo run --example extract_links -- page.html http://www.example.com/news/

use xss_shield::extract::extract_static_links;
use xss_shield::AbsoluteUrl;

const SAMPLE: &str = r#"<html><head>
<base href="http://www.site.local/news/">
<link rel=stylesheet href="/css/site.css">
<style>body { background: url(http://cdn.example.net/bg.png) }</style>
</head><body>
<a href="today.html">Today</a>
<a href="http://partner.example.org/offer">Offer</a>
<img src = http://evil1.com/a.jpg>
<iframe src="http://ads.example.com/slot"></iframe>
<a href="javascript:alert(1)">not fetched</a>
<!-- <img src="http://commented.example.com/x.gif"> -->
</body></html>"#;

pub fn main() {
    run(std::env::args().skip(1));
}

pub fn run(mut args: impl Iterator<Item = String>) {
    let doc = match args.next() {
        Some(path) => std::fs::read(&path).expect("readable file"),
        None => SAMPLE.as_bytes().to_vec(),
    };
    let page = AbsoluteUrl::parse(&args.next().unwrap_or_else(|| "http://www.site.local/".to_owned()))
        .expect("absolute page url");

    let inv = extract_static_links(&doc, &page);
    println!("page {page}");
    println!("external links (n = {}):", inv.n());
    for url in &inv.external_links {
        println!("  {url}");
    }
    println!("local links:");
    for url in &inv.local_links {
        println!("  {url}");
    }
    println!("frames:");
    for url in &inv.frames {
        println!("  {url}");
    }
    println!("{:?}", inv.stats);
}
