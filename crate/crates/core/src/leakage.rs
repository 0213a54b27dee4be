//! Exfiltration capacity of static external links.
//!
//! A script on a page with `n` distinct static external links can encode a
//! message by choosing which links to request and in which order. Issuing `r`
//! distinct requests distinguishes `n! / (n - r)!` messages (zero when no
//! request is made), i.e. `floor(log2 I)` bits. The ledger meters each page
//! context against a bit budget and refuses any request that would push it
//! over.
//!
//! All arithmetic is exact: `I` is a big integer and the bit count is its
//! bit length minus one.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::LeakageError;
use crate::url::AbsoluteUrl;

pub const DEFAULT_MAX_BITS: u64 = 50;

/// Number of distinguishable messages `I` for `r` requests among `n` links.
pub fn distinct_values(n: u64, r: u64) -> Result<BigUint, LeakageError> {
    if r > n {
        return Err(LeakageError::TooManyRequests { n, r });
    }
    if r == 0 {
        return Ok(BigUint::ZERO);
    }
    Ok((n - r + 1..=n).fold(BigUint::from(1u8), |acc, k| acc * k))
}

/// `floor(log2 I)`, or 0 when `I <= 1`.
pub fn leakage_bits(n: u64, r: u64) -> Result<u64, LeakageError> {
    let values = distinct_values(n, r)?;
    Ok(values.bits().saturating_sub(1))
}

/// Largest `r <= n` whose leakage fits in `budget_bits`.
pub fn max_requests_within(n: u64, budget_bits: u64) -> u64 {
    // bits(n, r) is non-decreasing in r, so stop at the first overrun.
    let mut best = 0;
    for r in 1..=n {
        match leakage_bits(n, r) {
            Ok(bits) if bits <= budget_bits => best = r,
            _ => break,
        }
    }
    best
}

/// One row of the leakage table for a fixed `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeakageRow {
    pub requests: u64,
    pub distinct_values: BigUint,
    pub bits: u64,
}

/// Rows `r = 1..=n`.
pub fn leakage_table(n: u64) -> Vec<LeakageRow> {
    (1..=n)
        .map(|r| LeakageRow {
            requests: r,
            distinct_values: distinct_values(n, r).expect("r <= n"),
            bits: leakage_bits(n, r).expect("r <= n"),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub max_bits: u64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            max_bits: DEFAULT_MAX_BITS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Allow,
    Deny,
}

/// Per-page-context record of which static external links were followed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeakageLedger {
    n: u64,
    followed: BTreeSet<AbsoluteUrl>,
    bits: u64,
}

impl LeakageLedger {
    pub fn new(n: u64) -> Self {
        LeakageLedger {
            n,
            followed: BTreeSet::new(),
            bits: 0,
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn r(&self) -> u64 {
        self.followed.len() as u64
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn followed(&self) -> &BTreeSet<AbsoluteUrl> {
        &self.followed
    }

    /// Grows the link count when more static links are found for the page
    /// (stylesheets, same-site frames).
    pub fn set_n(&mut self, n: u64) {
        debug_assert!(n >= self.r());
        self.n = n.max(self.r());
        self.bits = leakage_bits(self.n, self.r()).expect("r <= n");
    }

    /// Meters one request for a static external `link`.
    ///
    /// Repeat requests are free. A new link is admitted only if the leakage
    /// after admitting it stays within `cfg.max_bits`; otherwise the ledger
    /// is left untouched.
    pub fn record_and_check(&mut self, link: &AbsoluteUrl, cfg: &ThresholdConfig) -> Gate {
        if self.followed.contains(link) {
            return Gate::Allow;
        }
        match leakage_bits(self.n, self.r() + 1) {
            Ok(bits) if bits <= cfg.max_bits => {
                self.followed.insert(link.clone());
                self.bits = bits;
                Gate::Allow
            }
            _ => Gate::Deny,
        }
    }
}
