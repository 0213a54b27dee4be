//! A client-side forward proxy that limits what cross-site scripting can
//! leak out of a page.
//!
//! Every HTML page fetched through the proxy is scanned for its statically
//! embedded links. Requests a page makes to its own site pass; requests to
//! other sites pass only if they are among the page's static links, and then
//! only while the information the chosen sequence of links could encode stays
//! under a bit budget. Anything else is held for the operator. Each page also
//! receives a small control script that defeats pop-up `window.name`
//! exfiltration.
//!
//! The building blocks are usable on their own:
//!
//! - [`extract`] builds a page's [`LinkInventory`](extract::LinkInventory).
//! - [`leakage`] computes the exact leakage of `r` requests among `n` links.
//! - [`policy`] classifies requests and matches filter rules.
//! - [`inject`] inserts the control script.
//! - [`Shield`] combines them behind one lock; [`gateway`] and [`mgmt`] put
//!   it on the network.

pub mod alerts;
pub mod config;
pub mod error;
pub mod extract;
pub mod gateway;
pub mod ids;
pub mod inject;
pub mod leakage;
pub mod mgmt;
pub mod policy;
pub mod shield;
pub mod url;

pub use config::Config;
pub use gateway::context::{PageContext, ProxyRequest};
pub use gateway::RunningProxy;
pub use policy::{ActionKind, ProxyAction, Reason};
pub use shield::Shield;
pub use url::AbsoluteUrl;
