//! Golden-fixture checks shared by the focused suites and the acceptance run.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use xss_shield::extract::extract_static_links;
use xss_shield::inject::{inject, payload_bytes};
use proptest::prelude::*;
use xss_shield::AbsoluteUrl;

pub fn fixture_dir(kind: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(kind)
}

fn fixtures(kind: &str, ext: &str) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(fixture_dir(kind))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    out.sort();
    out
}

fn set(items: impl IntoIterator<Item = AbsoluteUrl>) -> BTreeSet<String> {
    items.into_iter().map(|u| u.as_str().to_owned()).collect()
}

/// Compares every `*.html` under `fixtures/extract` with its `*.links`
/// golden set. Returns the number of fixtures checked.
pub fn check_extraction_fixtures() -> Result<usize, String> {
    let docs = fixtures("extract", "html");
    for doc in &docs {
        let golden = std::fs::read_to_string(doc.with_extension("links")).map_err(|e| format!("{doc:?}: {e}"))?;
        let mut page = None;
        let (mut external, mut local, mut frames) = (BTreeSet::new(), BTreeSet::new(), BTreeSet::new());
        for line in golden.lines().filter(|l| !l.trim().is_empty()) {
            let (kind, url) = line.split_once(' ').ok_or_else(|| format!("bad golden line {line:?}"))?;
            let target = match kind {
                "page" => {
                    page = Some(url.to_owned());
                    continue;
                }
                "external" => &mut external,
                "local" => &mut local,
                "frame" => &mut frames,
                other => return Err(format!("unknown golden kind {other}")),
            };
            target.insert(url.to_owned());
        }
        let page = AbsoluteUrl::parse(&page.ok_or("golden lacks page line")?).unwrap();
        let inv = extract_static_links(&std::fs::read(doc).unwrap(), &page);
        let name = doc.file_name().unwrap().to_string_lossy();
        for (what, got, want) in [
            ("external", set(inv.external_links), external),
            ("local", set(inv.local_links), local),
            ("frames", set(inv.frames), frames),
        ] {
            if got != want {
                return Err(format!("{name} {what}: got {got:?}, want {want:?}"));
            }
        }
    }
    Ok(docs.len())
}

/// The corpus under `fixtures/inject`: each document carries `@@` where the
/// control script belongs. Returns (name, document without marker, offset).
pub fn injection_corpus() -> Vec<(String, Vec<u8>, usize)> {
    fixtures("inject", "html")
        .into_iter()
        .map(|p| {
            let raw = std::fs::read(&p).unwrap();
            let at = raw
                .windows(2)
                .position(|w| w == b"@@")
                .unwrap_or_else(|| panic!("{p:?} lacks @@"));
            let mut doc = raw[..at].to_vec();
            doc.extend_from_slice(&raw[at + 2..]);
            (p.file_name().unwrap().to_string_lossy().into_owned(), doc, at)
        })
        .collect()
}

/// Checks placement, byte preservation, single occurrence and idempotence
/// over the injection corpus. Returns the number of documents checked.
pub fn check_injection_corpus() -> Result<usize, String> {
    let payload = payload_bytes();
    let corpus = injection_corpus();
    for (name, doc, at) in &corpus {
        let out = inject(doc);
        let mut expected = doc[..*at].to_vec();
        expected.extend_from_slice(payload);
        expected.extend_from_slice(&doc[*at..]);
        if out != expected {
            return Err(format!("{name}: payload not at byte {at} or bytes altered"));
        }
        let count = out.windows(payload.len()).filter(|w| *w == payload).count();
        if count != 1 {
            return Err(format!("{name}: payload present {count} times"));
        }
        if inject(&out) != out {
            return Err(format!("{name}: second injection changed the document"));
        }
    }
    Ok(corpus.len())
}

fn fragment() -> impl Strategy<Value = String> {
    let host = prop::sample::select(vec!["a.example.com", "b.example.org", "www.site.local", "cdn.site.local", "x.co.uk"]);
    let path = "[a-z]{1,6}(\\.png|\\.js|/)?";
    (0..7usize, host, path).prop_map(|(shape, host, path)| match shape {
        0 => format!("<a href=\"http://{host}/{path}\">t</a>"),
        1 => format!("<img src='//{host}/{path}'>"),
        2 => format!("<div style=\"background:url(http://{host}/{path})\"></div>"),
        3 => format!("<style>p{{background:url('/{path}')}}</style>"),
        4 => format!("<iframe src=\"http://{host}/{path}\"></iframe>"),
        5 => format!("<a href=\"{path}\">rel</a>"),
        _ => "<p>text <b>only</b></p>".to_owned(),
    })
}

/// Well-formed documents built from link-bearing fragments.
pub fn html_document() -> impl Strategy<Value = String> {
    prop::collection::vec(fragment(), 0..12).prop_map(|v| v.join("\n"))
}
