use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use crate::leakage::ThresholdConfig;
use crate::policy::PolicyConfig;

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8118";
pub const DEFAULT_MGMT_LISTEN: &str = "127.0.0.1:8119";
pub const DEFAULT_MAX_BODY_BYTES: usize = 8 * 1024 * 1024;
pub const DEFAULT_ALERT_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_ALERT_QUEUE_CAP: usize = 256;
pub const DEFAULT_LONG_POLL: Duration = Duration::from_secs(25);
pub const DEFAULT_MAX_CONTEXTS: usize = 4096;

#[derive(Debug, Clone)]
pub struct Config {
    pub listen: SocketAddr,
    pub mgmt_listen: SocketAddr,
    pub policy: PolicyConfig,
    pub rules_file: Option<PathBuf>,
    pub alert_timeout: Duration,
    pub alert_queue_cap: usize,
    /// Longest a `GET /api/alerts?wait=1` call blocks.
    pub long_poll: Duration,
    pub inject: bool,
    pub max_body_bytes: usize,
    /// Treat `GET` requests that prefer `text/html` as top-level navigations
    /// even when they carry a `Referer`.
    pub navigation_heuristic: bool,
    /// Oldest contexts are dropped past this count.
    pub max_contexts: usize,
    /// Upstream address overrides keyed by host, or by registrable domain to
    /// cover every host under it.
    pub upstream_overrides: HashMap<String, SocketAddr>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            listen: DEFAULT_LISTEN.parse().expect("valid default"),
            mgmt_listen: DEFAULT_MGMT_LISTEN.parse().expect("valid default"),
            policy: PolicyConfig::default(),
            rules_file: None,
            alert_timeout: DEFAULT_ALERT_TIMEOUT,
            alert_queue_cap: DEFAULT_ALERT_QUEUE_CAP,
            long_poll: DEFAULT_LONG_POLL,
            inject: true,
            max_body_bytes: DEFAULT_MAX_BODY_BYTES,
            navigation_heuristic: false,
            max_contexts: DEFAULT_MAX_CONTEXTS,
            upstream_overrides: HashMap::new(),
        }
    }
}

impl Config {
    pub fn with_threshold(mut self, max_bits: u64) -> Self {
        self.policy.threshold = ThresholdConfig { max_bits };
        self
    }

    pub fn with_alert_timeout(mut self, timeout: Duration) -> Self {
        self.alert_timeout = timeout;
        self
    }

    /// Routes requests for `host` (or any host under it, when `host` is a
    /// registrable domain) to `addr`.
    pub fn with_upstream(mut self, host: &str, addr: SocketAddr) -> Self {
        self.upstream_overrides.insert(host.to_ascii_lowercase(), addr);
        self
    }

    /// Ephemeral loopback ports for both listeners.
    pub fn ephemeral(mut self) -> Self {
        self.listen = "127.0.0.1:0".parse().expect("valid");
        self.mgmt_listen = "127.0.0.1:0".parse().expect("valid");
        self
    }
}
