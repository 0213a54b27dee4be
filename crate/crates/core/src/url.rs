//! Normalized absolute URLs.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use url::{Host, Url};

use crate::error::UrlError;

/// An absolute URL with a non-empty lowercase host, default port elided and
/// fragment removed.
///
/// Equality, ordering and hashing all go through the serialized form, so two
/// spellings of the same resource (`HTTP://Evil1.COM:80/a.jpg#x` and
/// `http://evil1.com/a.jpg`) compare equal.
#[derive(Clone)]
pub struct AbsoluteUrl(Url);

impl AbsoluteUrl {
    pub fn parse(input: &str) -> Result<Self, UrlError> {
        let url = Url::parse(input.trim()).map_err(|e| UrlError::Parse {
            input: input.to_owned(),
            reason: e.to_string(),
        })?;
        Self::from_url(url)
    }

    /// Wraps an already parsed [`Url`], enforcing the host invariant.
    pub fn from_url(mut url: Url) -> Result<Self, UrlError> {
        match url.host_str() {
            Some(h) if !h.is_empty() => {}
            _ => return Err(UrlError::MissingHost(url.to_string())),
        }
        url.set_fragment(None);
        // url already drops scheme-default ports; this catches `https://x:443`
        // style inputs that arrive through `set_port`.
        if url.port().is_some() && url.port() == default_port(url.scheme()) {
            let _ = url.set_port(None);
        }
        Ok(AbsoluteUrl(url))
    }

    pub fn scheme(&self) -> &str {
        self.0.scheme()
    }

    /// Lowercase host. IPv6 literals are returned without brackets.
    pub fn host(&self) -> &str {
        match self.0.host() {
            Some(Host::Ipv6(_)) => self
                .0
                .host_str()
                .map(|h| h.trim_start_matches('[').trim_end_matches(']'))
                .unwrap_or_default(),
            _ => self.0.host_str().unwrap_or_default(),
        }
    }

    pub fn is_ip_literal(&self) -> bool {
        matches!(self.0.host(), Some(Host::Ipv4(_)) | Some(Host::Ipv6(_)))
    }

    pub fn port(&self) -> u16 {
        self.0.port_or_known_default().unwrap_or(0)
    }

    pub fn path(&self) -> &str {
        self.0.path()
    }

    pub fn query(&self) -> Option<&str> {
        self.0.query()
    }

    pub fn as_str(&self) -> &str {
        self.0.as_str()
    }

    pub fn as_url(&self) -> &Url {
        &self.0
    }

    /// `host[:port]` suitable for a `Host` header.
    pub fn authority(&self) -> String {
        match self.0.port() {
            Some(p) => format!("{}:{}", self.0.host_str().unwrap_or_default(), p),
            None => self.0.host_str().unwrap_or_default().to_owned(),
        }
    }

    /// Path plus query, the origin-form request target.
    pub fn request_target(&self) -> String {
        match self.0.query() {
            Some(q) => format!("{}?{}", self.0.path(), q),
            None => self.0.path().to_owned(),
        }
    }

    /// Resolves `reference` relative to this URL.
    pub fn join(&self, reference: &str) -> Result<AbsoluteUrl, UrlError> {
        let url = self.0.join(reference).map_err(|e| UrlError::Parse {
            input: reference.to_owned(),
            reason: e.to_string(),
        })?;
        Self::from_url(url)
    }
}

fn default_port(scheme: &str) -> Option<u16> {
    match scheme {
        "http" | "ws" => Some(80),
        "https" | "wss" => Some(443),
        "ftp" => Some(21),
        _ => None,
    }
}

impl PartialEq for AbsoluteUrl {
    fn eq(&self, other: &Self) -> bool {
        self.0.as_str() == other.0.as_str()
    }
}

impl Eq for AbsoluteUrl {}

impl Hash for AbsoluteUrl {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.as_str().hash(state)
    }
}

impl PartialOrd for AbsoluteUrl {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for AbsoluteUrl {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.as_str().cmp(other.0.as_str())
    }
}

impl fmt::Display for AbsoluteUrl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0.as_str())
    }
}

impl fmt::Debug for AbsoluteUrl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AbsoluteUrl({})", self.0.as_str())
    }
}

impl FromStr for AbsoluteUrl {
    type Err = UrlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AbsoluteUrl::parse(s)
    }
}

impl Serialize for AbsoluteUrl {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for AbsoluteUrl {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        AbsoluteUrl::parse(&s).map_err(serde::de::Error::custom)
    }
}
