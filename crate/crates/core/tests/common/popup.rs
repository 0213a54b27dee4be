//! Drives `fixtures/popup_harness.js` under node.

use std::io::Write;
use std::process::{Command, Stdio};

use serde_json::{json, Value};
use xss_shield::extract::html::{Token, Tokenizer};

/// Bodies of the inline `<script>` elements of `document`, in order.
pub fn inline_scripts(document: &[u8]) -> Vec<String> {
    Tokenizer::new(document)
        .filter_map(|t| match t {
            Token::RawText { element, text, .. } if element.eq_ignore_ascii_case(b"script") => {
                Some(String::from_utf8_lossy(text).into_owned())
            }
            _ => None,
        })
        .collect()
}

pub fn node() -> String {
    std::env::var("NODE").unwrap_or_else(|_| "node".to_owned())
}

/// Runs `document`'s scripts once per case and returns the harness results.
pub fn run(document: &[u8], cases: &[Value]) -> Result<Vec<Value>, String> {
    let harness = super::golden::fixture_dir("popup_harness.js");
    let mut child = Command::new(node())
        .arg(&harness)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| format!("cannot start node: {e}"))?;
    let input = json!({ "scripts": inline_scripts(document), "cases": cases });
    child
        .stdin
        .take()
        .unwrap()
        .write_all(input.to_string().as_bytes())
        .map_err(|e| e.to_string())?;
    let out = child.wait_with_output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())
}

pub fn case(opener: &str, name: &str, search: &str) -> Value {
    json!({ "opener": opener, "name": name, "origin": "http://site.local", "search": search })
}

/// The victim page: its own script reads `window.name` as soon as it runs.
pub const VICTIM: &[u8] = b"<html><head><title>popup</title><script>seen.push(window.name);</script></head><body></body></html>";

/// Checks the pop-up behaviour of the injected victim page. Returns the
/// number of cases checked.
pub fn check_popup_harness() -> Result<usize, String> {
    let injected = xss_shield::inject::inject(VICTIM);
    let cases = [
        case("foreign", "cookie=secret", ""),
        case("foreign-readable", "cookie=secret", ""),
        case("same", "keep", ""),
        case("none", "keep", ""),
        case("none", "", "?main.html"),
        case("none", "", "?javascript:alert(1)"),
        case("none", "", "?http://evil.local/x"),
    ];
    let got = run(&injected, &cases)?;
    let expect = |i: usize, seen: Value, target: Value, frame: Value| -> Result<(), String> {
        let g = &got[i];
        if g["seen"] != seen || g["targetPage"] != target || g["frameLocation"] != frame {
            return Err(format!("case {i}: got {g}"));
        }
        Ok(())
    };
    expect(0, json!([""]), json!(""), Value::Null)?;
    expect(1, json!([""]), json!(""), Value::Null)?;
    expect(2, json!(["keep"]), json!(""), Value::Null)?;
    expect(3, json!(["keep"]), json!(""), Value::Null)?;
    expect(4, json!([""]), json!("main.html"), json!("main.html"))?;
    expect(5, json!([""]), json!("undefined"), Value::Null)?;
    expect(6, json!([""]), json!("undefined"), Value::Null)?;

    // Without the control script the attack works.
    let bare = run(VICTIM, &cases[..1])?;
    if bare[0]["seen"] != json!(["cookie=secret"]) {
        return Err(format!("uninjected page: got {}", bare[0]));
    }
    Ok(cases.len())
}
