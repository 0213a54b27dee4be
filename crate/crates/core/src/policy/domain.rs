//! Registrable-domain extraction against an embedded public-suffix table.

use std::collections::HashSet;
use std::fmt;
use std::net::IpAddr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::url::AbsoluteUrl;

const SNAPSHOT: &str = include_str!("../../data/public_suffix.dat");

/// The registrable domain ("public suffix plus one label") that identifies a
/// site owner, e.g. `chennaionline.com` for `client1.chennaionline.com`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DomainKey(String);

impl DomainKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn of(url: &AbsoluteUrl) -> DomainKey {
        registrable_domain(url.host())
    }
}

impl fmt::Display for DomainKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Parsed suffix rules.
#[derive(Debug, Default)]
pub struct SuffixTable {
    version: String,
    exact: HashSet<String>,
    /// Parents of `*.parent` rules.
    wildcard: HashSet<String>,
    /// Hosts named by `!host` rules.
    exception: HashSet<String>,
}

impl SuffixTable {
    pub fn parse(text: &str) -> SuffixTable {
        let mut table = SuffixTable::default();
        for line in text.lines() {
            let line = line.trim();
            if let Some(comment) = line.strip_prefix("//") {
                if let Some(v) = comment.trim().strip_prefix("version:") {
                    table.version = v.trim().to_owned();
                }
                continue;
            }
            let Some(rule) = line.split_whitespace().next() else {
                continue;
            };
            let rule = rule.to_ascii_lowercase();
            if let Some(host) = rule.strip_prefix('!') {
                table.exception.insert(host.to_owned());
            } else if let Some(parent) = rule.strip_prefix("*.") {
                table.wildcard.insert(parent.to_owned());
            } else {
                table.exact.insert(rule);
            }
        }
        table
    }

    /// The embedded snapshot.
    pub fn embedded() -> &'static SuffixTable {
        static TABLE: OnceLock<SuffixTable> = OnceLock::new();
        TABLE.get_or_init(|| SuffixTable::parse(SNAPSHOT))
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    /// Number of trailing labels of `labels` that form the public suffix.
    fn suffix_len(&self, labels: &[&str]) -> usize {
        let n = labels.len();
        for k in (1..=n).rev() {
            if self.exception.contains(&labels[n - k..].join(".")) {
                return k - 1;
            }
        }
        // The implicit `*` rule makes every TLD a suffix.
        let mut best = 1;
        for k in 1..=n {
            if self.exact.contains(&labels[n - k..].join(".")) {
                best = best.max(k);
            }
            if k >= 2 && self.wildcard.contains(&labels[n - k + 1..].join(".")) {
                best = best.max(k);
            }
        }
        best
    }

    pub fn registrable_domain(&self, host: &str) -> DomainKey {
        let host = host
            .trim_start_matches('[')
            .trim_end_matches(']')
            .trim_end_matches('.')
            .to_ascii_lowercase();
        if host.parse::<IpAddr>().is_ok() {
            return DomainKey(host);
        }
        let labels: Vec<&str> = host.split('.').collect();
        let keep = self.suffix_len(&labels) + 1;
        if labels.len() <= keep {
            return DomainKey(host);
        }
        DomainKey(labels[labels.len() - keep..].join("."))
    }
}

/// Registrable domain of `host` under the embedded table. IP literals and
/// single-label hosts are their own key; a host that is itself a public suffix
/// is returned unchanged.
pub fn registrable_domain(host: &str) -> DomainKey {
    SuffixTable::embedded().registrable_domain(host)
}
