use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use tracing_subscriber::EnvFilter;
use xss_shield::config::{self, Config};
use xss_shield::RunningProxy;

/// Forward proxy that meters static-link exfiltration and holds unknown
/// cross-site requests for an operator decision.
#[derive(Debug, Parser)]
#[command(name = "xss-shield", version)]
struct Args {
    /// Proxy listen address.
    #[arg(long, default_value = config::DEFAULT_LISTEN)]
    listen: SocketAddr,
    /// Management API listen address.
    #[arg(long, default_value = config::DEFAULT_MGMT_LISTEN)]
    mgmt_listen: SocketAddr,
    /// Maximum leakage per page, in bits.
    #[arg(long, default_value_t = 50)]
    threshold_bits: u64,
    /// JSON-lines file holding permanent rules.
    #[arg(long)]
    rules_file: Option<PathBuf>,
    /// Seconds a held request waits for a decision before it is denied.
    #[arg(long, default_value_t = 30)]
    alert_timeout_secs: u64,
    /// Do not inject the control script into pages.
    #[arg(long)]
    no_inject: bool,
    /// Largest HTML/CSS body that is buffered and rewritten.
    #[arg(long, default_value_t = config::DEFAULT_MAX_BODY_BYTES)]
    max_body_bytes: usize,
    /// Tracing filter, e.g. `info` or `xss_shield=debug`.
    #[arg(long, default_value = "info")]
    log_level: String,
    /// Check permanent deny rules before a page's temporary allows.
    #[arg(long)]
    permanent_deny_overrides: bool,
    /// Treat GET requests preferring text/html as navigations even with a Referer.
    #[arg(long)]
    navigation_heuristic: bool,
    /// Send requests for HOST to ADDR instead of resolving it (HOST=ADDR).
    #[arg(long = "resolve", value_parser = parse_override)]
    resolve: Vec<(String, SocketAddr)>,
}

fn parse_override(s: &str) -> Result<(String, SocketAddr), String> {
    let (host, addr) = s.split_once('=').ok_or("expected HOST=ADDR")?;
    let addr = addr.parse().map_err(|e| format!("{addr}: {e}"))?;
    Ok((host.to_owned(), addr))
}

#[tokio::main]
async fn main() -> ExitCode {
    let args = Args::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_new(&args.log_level).unwrap_or_else(|_| EnvFilter::new("info")))
        .init();

    let mut config = Config {
        listen: args.listen,
        mgmt_listen: args.mgmt_listen,
        rules_file: args.rules_file,
        alert_timeout: Duration::from_secs(args.alert_timeout_secs),
        inject: !args.no_inject,
        max_body_bytes: args.max_body_bytes,
        navigation_heuristic: args.navigation_heuristic,
        ..Config::default()
    }
    .with_threshold(args.threshold_bits);
    config.policy.permanent_deny_overrides = args.permanent_deny_overrides;
    for (host, addr) in args.resolve {
        config = config.with_upstream(&host, addr);
    }

    match RunningProxy::start(config).await {
        Ok(proxy) => {
            tokio::select! {
                _ = proxy.wait() => {}
                _ = tokio::signal::ctrl_c() => tracing::info!("shutting down"),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("xss-shield: {e}");
            ExitCode::FAILURE
        }
    }
}
