//! Local/external classification and the request decision pipeline.
//!
//! A request is local when its registrable domain matches the page that
//! referred it. External requests are checked against the referring page's
//! temporary rules, then against permanent rules, and prompt the operator
//! when nothing matches. Temporary allows for a page's own static links still
//! pass through that page's leakage ledger.

pub mod domain;
pub mod rules;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::gateway::context::{PageContext, ProxyRequest};
use crate::leakage::{Gate, ThresholdConfig};
use crate::url::AbsoluteUrl;

pub use self::domain::{registrable_domain, DomainKey};
pub use self::rules::{
    FilterRule, Lifetime, NewRule, PatternKind, RuleAction, RuleOrigin, RulePattern, RuleStore,
};

/// True iff both URLs share a registrable domain.
pub fn is_local(request_url: &AbsoluteUrl, referrer: &AbsoluteUrl) -> bool {
    DomainKey::of(request_url) == DomainKey::of(referrer)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Forward,
    Deny,
    Prompt,
}

/// Why a request got its action. Serialized with the tokens used in the
/// `X-Filter-Reason` header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    /// No usable `Referer`: treated as a top-level navigation.
    Navigation,
    LocalLink,
    TemporaryRule,
    PermanentAllow,
    PermanentDeny,
    LeakageThreshold,
    NoRule,
}

impl Reason {
    pub fn token(self) -> &'static str {
        match self {
            Reason::Navigation => "navigation",
            Reason::LocalLink => "local-link",
            Reason::TemporaryRule => "temporary-rule",
            Reason::PermanentAllow => "permanent-allow",
            Reason::PermanentDeny => "permanent-deny",
            Reason::LeakageThreshold => "leakage-threshold",
            Reason::NoRule => "no-rule",
        }
    }

    pub fn from_token(token: &str) -> Option<Reason> {
        [
            Reason::Navigation,
            Reason::LocalLink,
            Reason::TemporaryRule,
            Reason::PermanentAllow,
            Reason::PermanentDeny,
            Reason::LeakageThreshold,
            Reason::NoRule,
        ]
        .into_iter()
        .find(|r| r.token() == token)
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProxyAction {
    pub kind: ActionKind,
    pub reason: Reason,
}

impl ProxyAction {
    pub const fn forward(reason: Reason) -> Self {
        ProxyAction {
            kind: ActionKind::Forward,
            reason,
        }
    }

    pub const fn deny(reason: Reason) -> Self {
        ProxyAction {
            kind: ActionKind::Deny,
            reason,
        }
    }

    pub const fn prompt() -> Self {
        ProxyAction {
            kind: ActionKind::Prompt,
            reason: Reason::NoRule,
        }
    }

    pub fn is_forward(&self) -> bool {
        self.kind == ActionKind::Forward
    }
}

/// Pipeline stage that produced a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Navigation,
    Local,
    Temporary,
    Permanent,
    Prompt,
}

impl ProxyAction {
    pub fn branch(&self) -> Branch {
        match self.reason {
            Reason::Navigation => Branch::Navigation,
            Reason::LocalLink => Branch::Local,
            Reason::TemporaryRule | Reason::LeakageThreshold => Branch::Temporary,
            Reason::PermanentAllow | Reason::PermanentDeny => Branch::Permanent,
            Reason::NoRule => Branch::Prompt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub threshold: ThresholdConfig,
    /// Check permanent deny rules before temporary rules.
    pub permanent_deny_overrides: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            threshold: ThresholdConfig::default(),
            permanent_deny_overrides: false,
        }
    }
}

/// Decides one request. `ctx` is the page context the referrer belongs to,
/// if any; its ledger is updated when a static external link is admitted.
pub fn decide(
    req: &ProxyRequest,
    ctx: Option<&mut PageContext>,
    store: &RuleStore,
    cfg: &PolicyConfig,
) -> ProxyAction {
    let Some(referrer) = &req.referrer else {
        return ProxyAction::forward(Reason::Navigation);
    };
    if is_local(&req.url, referrer) {
        return ProxyAction::forward(Reason::LocalLink);
    }

    if cfg.permanent_deny_overrides {
        if let Some(rule) = store.match_permanent(&req.url) {
            if rule.action == RuleAction::Deny {
                return ProxyAction::deny(Reason::PermanentDeny);
            }
        }
    }

    let ctx_id = ctx.as_ref().map(|c| c.id);
    match store.match_rule(&req.url, ctx_id) {
        Some(rule) if !rule.is_permanent() => match rule.action {
            RuleAction::Allow => match ctx {
                Some(ctx) if ctx.inventory.is_external_link(&req.url) => {
                    match ctx.meter(&req.url, &cfg.threshold) {
                        Gate::Allow => ProxyAction::forward(Reason::TemporaryRule),
                        Gate::Deny => ProxyAction::deny(Reason::LeakageThreshold),
                    }
                }
                _ => ProxyAction::forward(Reason::TemporaryRule),
            },
            RuleAction::Deny => ProxyAction::deny(Reason::TemporaryRule),
        },
        Some(rule) => match rule.action {
            RuleAction::Allow => ProxyAction::forward(Reason::PermanentAllow),
            RuleAction::Deny => ProxyAction::deny(Reason::PermanentDeny),
        },
        None => ProxyAction::prompt(),
    }
}
