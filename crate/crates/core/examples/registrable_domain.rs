//! Registrable domains and the local/external test.
//!
//!     cargo run --example registrable_domain -- client1.chennaionline.com foo.bar.co.uk

use xss_shield::policy::{domain::SuffixTable, is_local, registrable_domain};
use xss_shield::AbsoluteUrl;

pub fn main() {
    run(std::env::args().skip(1));
}

pub fn run(args: impl Iterator<Item = String>) {
    let mut hosts: Vec<String> = args.collect();
    if hosts.is_empty() {
        hosts = ["client1.chennaionline.com", "www.chennaionline.com", "news.bbc.co.uk", "me.github.io", "127.0.0.1", "localhost"]
            .map(String::from)
            .to_vec();
    }
    println!("suffix table {}", SuffixTable::embedded().version());
    for host in &hosts {
        println!("{host:>32} -> {}", registrable_domain(host).as_str());
    }

    let a = AbsoluteUrl::parse("http://www.chennaionline.com/news").unwrap();
    let b = AbsoluteUrl::parse("http://client1.chennaionline.com/").unwrap();
    let c = AbsoluteUrl::parse("http://evil1.com/a.jpg").unwrap();
    println!("\nis_local({a}, {b}) = {}", is_local(&a, &b));
    println!("is_local({c}, {b}) = {}", is_local(&c, &b));
}
