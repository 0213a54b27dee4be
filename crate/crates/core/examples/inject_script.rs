//! Inserts the control script into a document and shows where it went.
//!
//!     cargo run --example inject_script -- page.html

use xss_shield::inject::{build_payload, inject, injection_point};

const SAMPLE: &str = "<!DOCTYPE html>\n<html><head><title>guestbook</title></head><body></body></html>\n";

pub fn main() {
    run(std::env::args().skip(1));
}

pub fn run(mut args: impl Iterator<Item = String>) {
    let doc = match args.next() {
        Some(path) => std::fs::read(&path).expect("readable file"),
        None => SAMPLE.as_bytes().to_vec(),
    };
    let payload = build_payload();
    let point = injection_point(&doc);
    let out = inject(&doc);

    println!("injection point: {point:?}");
    println!("payload: {} bytes, marker {}", payload.element.len(), payload.marker);
    println!("document grew {} -> {} bytes", doc.len(), out.len());
    println!("second pass unchanged: {}", inject(&out) == out);
    let at = point.offset();
    println!("\n{}[control script]{}", String::from_utf8_lossy(&doc[..at]), String::from_utf8_lossy(&doc[at..]));
}
