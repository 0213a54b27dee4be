//! Shared filter state and the atomic operations on it.
//!
//! One lock guards contexts, rules, alerts and counters, so every
//! read-decide-update step runs atomically with respect to other requests.
//! Held requests wait on their alert channel outside the lock.

use std::collections::{BTreeMap, HashMap};
use std::time::Duration;

use chrono::{DateTime, Utc};
use encoding_rs::Encoding;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use tokio::sync::Notify;

use crate::alerts::{AlertQueue, AlertTicket, Enqueued, PendingAlert, Scope, TicketState, Verdict};
use crate::config::Config;
use crate::error::{AlertError, RuleError, RulesFileError};
use crate::extract::{self, ExtractionStats};
use crate::gateway::context::{ContextSnapshot, PageContext, ProxyRequest};
use crate::ids::{AlertId, ContextId, RuleId};
use crate::policy::{
    decide, is_local, ActionKind, FilterRule, Lifetime, NewRule, PatternKind, PolicyConfig,
    ProxyAction, Reason, RuleAction, RuleOrigin, RulePattern, RuleStore,
};
use crate::url::AbsoluteUrl;

/// Version of every JSON document the management API returns.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Default, Clone, Serialize)]
pub struct Counters {
    pub requests: u64,
    pub forwarded: u64,
    pub denied: u64,
    pub prompted: u64,
    pub by_reason: BTreeMap<String, u64>,
    pub html_documents: u64,
    pub stylesheets: u64,
    pub injected: u64,
    pub oversized: u64,
    pub decode_failures: u64,
    pub upstream_errors: u64,
    pub tunnels: u64,
}

/// Outcome of the synchronous decision step.
#[derive(Debug)]
pub struct Evaluation {
    pub action: ProxyAction,
    /// Context created for a top-level navigation.
    pub navigation_context: Option<ContextId>,
    /// Set when `action` is a prompt.
    pub pending: Option<PendingAlert>,
}

/// Where a response body came from, for context attribution.
#[derive(Debug, Clone)]
pub struct ResponseOrigin {
    pub url: AbsoluteUrl,
    pub referrer: Option<AbsoluteUrl>,
    pub navigation_context: Option<ContextId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HtmlOutcome {
    pub context: ContextId,
    /// External links the context now holds.
    pub n: usize,
    /// Temporary rules created by this document.
    pub new_rules: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RuntimeConfig {
    pub threshold_bits: u64,
    pub permanent_deny_overrides: bool,
    pub alert_timeout_secs: f64,
    pub inject: bool,
    pub max_body_bytes: usize,
    pub navigation_heuristic: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct ConfigPatch {
    #[serde(default)]
    pub threshold_bits: Option<u64>,
    #[serde(default)]
    pub permanent_deny_overrides: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlertsView {
    pub pending: Vec<AlertTicket>,
    pub history: Vec<AlertTicket>,
}

/// Point-in-time view of all filter state.
#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub schema_version: u32,
    pub taken_at: DateTime<Utc>,
    pub config: RuntimeConfig,
    pub rules: Vec<FilterRule>,
    pub contexts: Vec<ContextSnapshot>,
    pub extraction: ExtractionStats,
    pub counters: Counters,
    pub alerts: AlertsView,
}

/// Body of a rule creation request.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct RuleRequest {
    pub pattern: RulePattern,
    pub action: RuleAction,
    /// Owner context for a temporary rule; permanent when absent.
    #[serde(default)]
    pub context_id: Option<ContextId>,
}

#[derive(Debug, thiserror::Error)]
pub enum DecisionError {
    #[error(transparent)]
    Alert(#[from] AlertError),
    #[error(transparent)]
    Rule(#[from] RuleError),
}

struct State {
    contexts: BTreeMap<ContextId, PageContext>,
    by_url: HashMap<AbsoluteUrl, ContextId>,
    rules: RuleStore,
    alerts: AlertQueue,
    policy: PolicyConfig,
    counters: Counters,
    extraction: ExtractionStats,
    next_context: u64,
}

impl State {
    fn establish(&mut self, page_url: AbsoluteUrl, max_contexts: usize) -> ContextId {
        if let Some(&old) = self.by_url.get(&page_url) {
            if self.contexts.get(&old).is_some_and(|c| c.page_url == page_url) {
                self.drop_context(old);
            }
        }
        self.next_context += 1;
        let id = ContextId(self.next_context);
        self.by_url.insert(page_url.clone(), id);
        self.contexts.insert(id, PageContext::new(id, page_url));
        while self.contexts.len() > max_contexts {
            let oldest = *self.contexts.keys().next().expect("non-empty");
            self.drop_context(oldest);
        }
        id
    }

    fn drop_context(&mut self, id: ContextId) {
        self.contexts.remove(&id);
        self.rules.drop_context(id);
        self.by_url.retain(|_, v| *v != id);
    }

    fn context_for(&self, url: &AbsoluteUrl) -> Option<ContextId> {
        self.by_url.get(url).copied()
    }

    fn count(&mut self, action: ProxyAction) {
        match action.kind {
            ActionKind::Forward => self.counters.forwarded += 1,
            ActionKind::Deny => self.counters.denied += 1,
            ActionKind::Prompt => self.counters.prompted += 1,
        }
        *self
            .counters
            .by_reason
            .entry(action.reason.token().to_owned())
            .or_default() += 1;
    }

    fn absorb(&mut self, owner: ContextId, inventory: extract::LinkInventory) -> HtmlOutcome {
        self.extraction += inventory.stats;
        let ctx = self.contexts.get_mut(&owner).expect("owner exists");
        let added = ctx.absorb(inventory);
        let total = self.rules.register_temporary_rules(&ctx.inventory, owner);
        debug_assert_eq!(total, ctx.inventory.n());
        HtmlOutcome {
            context: owner,
            n: ctx.inventory.n(),
            new_rules: added.len(),
        }
    }
}

pub struct Shield {
    config: Config,
    state: Mutex<State>,
    alerts_changed: Notify,
}

impl Shield {
    /// Opens the rules file named in `config`, if any.
    pub fn new(config: Config) -> Result<Shield, RulesFileError> {
        let rules = match &config.rules_file {
            Some(path) => RuleStore::open(path)?,
            None => RuleStore::new(),
        };
        Ok(Shield::with_rules(config, rules))
    }

    pub fn with_rules(config: Config, rules: RuleStore) -> Shield {
        let state = State {
            contexts: BTreeMap::new(),
            by_url: HashMap::new(),
            rules,
            alerts: AlertQueue::new(config.alert_queue_cap),
            policy: config.policy,
            counters: Counters::default(),
            extraction: ExtractionStats::default(),
            next_context: 0,
        };
        Shield {
            config,
            state: Mutex::new(state),
            alerts_changed: Notify::new(),
        }
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    fn is_navigation(&self, req: &ProxyRequest) -> bool {
        req.referrer.is_none() || (self.config.navigation_heuristic && req.looks_like_navigation())
    }

    /// Fresh context for a top-level page, replacing any earlier context for
    /// the same URL.
    pub fn establish_page_context(&self, page_url: AbsoluteUrl) -> ContextId {
        self.state.lock().establish(page_url, self.config.max_contexts)
    }

    /// The atomic decision step: establishes a context for navigations, runs
    /// the pipeline and queues an alert when it prompts.
    pub fn evaluate(&self, req: &ProxyRequest) -> Evaluation {
        let mut guard = self.state.lock();
        let st = &mut *guard;
        st.counters.requests += 1;

        let navigation_context = self
            .is_navigation(req)
            .then(|| st.establish(req.url.clone(), self.config.max_contexts));
        let referrer_context = req.referrer.as_ref().and_then(|r| st.context_for(r));
        let ctx = referrer_context.and_then(|id| st.contexts.get_mut(&id));
        let mut action = decide(req, ctx, &st.rules, &st.policy);

        let mut pending = None;
        if action.kind == ActionKind::Prompt {
            match st
                .alerts
                .enqueue(req.url.clone(), req.referrer.clone(), referrer_context)
            {
                Enqueued::Held(held) => pending = Some(held),
                Enqueued::Refused(_) => action = ProxyAction::deny(Reason::NoRule),
            }
            self.alerts_changed.notify_waiters();
        }
        st.count(action);
        Evaluation {
            action,
            navigation_context,
            pending,
        }
    }

    /// Waits for the operator; denies on timeout.
    pub async fn await_decision(&self, pending: PendingAlert, timeout: Duration) -> ProxyAction {
        let id = pending.id;
        let verdict = match tokio::time::timeout(timeout, pending.receiver).await {
            Ok(Ok(verdict)) => Some(verdict),
            _ => {
                let mut st = self.state.lock();
                match st.alerts.expire(id) {
                    Some(_) => None,
                    // Decided between the timeout firing and taking the lock.
                    None => match st.alerts.get(id).map(|t| t.state) {
                        Some(TicketState::Decided { action, scope }) => Some(Verdict {
                            action,
                            scope,
                            pattern: None,
                        }),
                        _ => None,
                    },
                }
            }
        };
        let action = match verdict {
            Some(v) => verdict_action(&v),
            None => ProxyAction::deny(Reason::NoRule),
        };
        let mut st = self.state.lock();
        st.count(action);
        drop(st);
        self.alerts_changed.notify_waiters();
        action
    }

    /// Decides a request end to end, holding it for the operator when needed.
    /// Returns the terminal action and the navigation context, if one was
    /// created.
    pub async fn handle_request(&self, req: &ProxyRequest) -> (ProxyAction, Option<ContextId>) {
        let eval = self.evaluate(req);
        let action = match eval.pending {
            Some(pending) => self.await_decision(pending, self.config.alert_timeout).await,
            None => eval.action,
        };
        (action, eval.navigation_context)
    }

    /// Operator decision for a pending alert. Creates the scoped rule and
    /// releases the held request.
    pub fn decide_alert(&self, id: AlertId, verdict: Verdict) -> Result<AlertTicket, DecisionError> {
        let mut guard = self.state.lock();
        let st = &mut *guard;
        let ticket = match st.alerts.get(id) {
            Some(t) if t.state == TicketState::Pending => t.clone(),
            Some(_) => return Err(AlertError::AlreadyResolved(id.0).into()),
            None => return Err(AlertError::NotFound(id.0).into()),
        };
        let lifetime = match verdict.scope {
            Scope::Permanent => Some(Lifetime::Permanent),
            Scope::Temporary => ticket
                .context_id
                .filter(|c| st.contexts.contains_key(c))
                .map(|owner| Lifetime::Temporary { owner }),
        };
        if let Some(lifetime) = lifetime {
            let url = &ticket.request_url;
            let pattern = match verdict.pattern_kind() {
                PatternKind::Exact => RulePattern::exact(url),
                PatternKind::Prefix => RulePattern::prefix(format!("{}://{}/", url.scheme(), url.authority())),
                PatternKind::Domain => RulePattern::domain(url.host()),
            };
            st.rules.add(NewRule {
                pattern,
                action: verdict.action,
                lifetime,
                origin: RuleOrigin::UserDecision,
            })?;
        }
        let ticket = st.alerts.decide(id, verdict)?;
        drop(guard);
        self.alerts_changed.notify_waiters();
        Ok(ticket)
    }

    pub fn pending_alerts(&self) -> Vec<AlertTicket> {
        self.state.lock().alerts.pending().cloned().collect()
    }

    /// Pending alerts, waiting up to `wait` for one to arrive when the queue
    /// is empty.
    pub async fn wait_for_alerts(&self, wait: Duration) -> Vec<AlertTicket> {
        let deadline = tokio::time::Instant::now() + wait;
        loop {
            let notified = self.alerts_changed.notified();
            tokio::pin!(notified);
            notified.as_mut().enable();
            let pending = self.pending_alerts();
            if !pending.is_empty() {
                return pending;
            }
            if tokio::time::timeout_at(deadline, notified).await.is_err() {
                return Vec::new();
            }
        }
    }

    /// Attributes an HTML document to a context and registers its static
    /// links. A navigation keeps its own context; a framed document joins its
    /// parent's context when same-site and gets a fresh one otherwise.
    pub fn process_html(
        &self,
        origin: &ResponseOrigin,
        document: &[u8],
        encoding: Option<&'static Encoding>,
    ) -> HtmlOutcome {
        let inventory = extract::extract_static_links_with_encoding(document, &origin.url, encoding);
        let mut st = self.state.lock();
        st.counters.html_documents += 1;
        let nav = origin.navigation_context.filter(|c| st.contexts.contains_key(c));
        let owner = match nav {
            Some(owner) => owner,
            None => {
                let parent = origin
                    .referrer
                    .as_ref()
                    .and_then(|r| st.context_for(r))
                    .filter(|p| is_local(&origin.url, &st.contexts[p].page_url));
                match parent {
                    Some(parent) => {
                        st.by_url.entry(origin.url.clone()).or_insert(parent);
                        parent
                    }
                    None => st.establish(origin.url.clone(), self.config.max_contexts),
                }
            }
        };
        st.absorb(owner, inventory)
    }

    /// Adds a stylesheet's `url()` links to the context of the page that
    /// requested it. Returns `None` when no context owns the request.
    pub fn process_css(&self, origin: &ResponseOrigin, css: &str) -> Option<HtmlOutcome> {
        let mut st = self.state.lock();
        let owner = origin.referrer.as_ref().and_then(|r| st.context_for(r))?;
        st.counters.stylesheets += 1;
        let page_url = st.contexts[&owner].page_url.clone();
        let inventory = extract::extract_stylesheet(css, &origin.url, &page_url);
        // Resources referenced from the stylesheet carry it as Referer.
        st.by_url.entry(origin.url.clone()).or_insert(owner);
        Some(st.absorb(owner, inventory))
    }

    pub(crate) fn record(&self, f: impl FnOnce(&mut Counters)) {
        f(&mut self.state.lock().counters)
    }

    pub fn context(&self, id: ContextId) -> Option<ContextSnapshot> {
        let st = self.state.lock();
        st.contexts.get(&id).map(|c| c.snapshot(&st.policy.threshold))
    }

    pub fn context_for_url(&self, url: &AbsoluteUrl) -> Option<ContextSnapshot> {
        let st = self.state.lock();
        let id = st.context_for(url)?;
        st.contexts.get(&id).map(|c| c.snapshot(&st.policy.threshold))
    }

    pub fn contexts(&self) -> Vec<ContextSnapshot> {
        let st = self.state.lock();
        st.contexts
            .values()
            .map(|c| c.snapshot(&st.policy.threshold))
            .collect()
    }

    pub fn rules(&self) -> Vec<FilterRule> {
        self.state.lock().rules.iter().cloned().collect()
    }

    pub fn rule(&self, id: RuleId) -> Option<FilterRule> {
        self.state.lock().rules.get(id).cloned()
    }

    pub fn add_rule(&self, req: RuleRequest) -> Result<FilterRule, RuleError> {
        let mut st = self.state.lock();
        let lifetime = match req.context_id {
            Some(owner) if st.contexts.contains_key(&owner) => Lifetime::Temporary { owner },
            Some(owner) => return Err(RuleError::UnknownContext(owner.0)),
            None => Lifetime::Permanent,
        };
        st.rules
            .add(NewRule {
                pattern: req.pattern,
                action: req.action,
                lifetime,
                origin: RuleOrigin::UserDecision,
            })
            .cloned()
    }

    pub fn remove_rule(&self, id: RuleId) -> Result<FilterRule, RuleError> {
        self.state.lock().rules.remove(id)
    }

    pub fn runtime_config(&self) -> RuntimeConfig {
        let st = self.state.lock();
        self.runtime_config_of(&st.policy)
    }

    fn runtime_config_of(&self, policy: &PolicyConfig) -> RuntimeConfig {
        RuntimeConfig {
            threshold_bits: policy.threshold.max_bits,
            permanent_deny_overrides: policy.permanent_deny_overrides,
            alert_timeout_secs: self.config.alert_timeout.as_secs_f64(),
            inject: self.config.inject,
            max_body_bytes: self.config.max_body_bytes,
            navigation_heuristic: self.config.navigation_heuristic,
        }
    }

    pub fn update_config(&self, patch: ConfigPatch) -> RuntimeConfig {
        let mut st = self.state.lock();
        if let Some(bits) = patch.threshold_bits {
            st.policy.threshold.max_bits = bits;
        }
        if let Some(flag) = patch.permanent_deny_overrides {
            st.policy.permanent_deny_overrides = flag;
        }
        self.runtime_config_of(&st.policy)
    }

    pub fn counters(&self) -> Counters {
        self.state.lock().counters.clone()
    }

    pub fn snapshot(&self) -> Snapshot {
        let st = self.state.lock();
        Snapshot {
            schema_version: SCHEMA_VERSION,
            taken_at: Utc::now(),
            config: self.runtime_config_of(&st.policy),
            rules: st.rules.iter().cloned().collect(),
            contexts: st
                .contexts
                .values()
                .map(|c| c.snapshot(&st.policy.threshold))
                .collect(),
            extraction: st.extraction,
            counters: st.counters.clone(),
            alerts: AlertsView {
                pending: st.alerts.pending().cloned().collect(),
                history: st.alerts.history().cloned().collect(),
            },
        }
    }
}

fn verdict_action(v: &Verdict) -> ProxyAction {
    match (v.action, v.scope) {
        (RuleAction::Allow, Scope::Permanent) => ProxyAction::forward(Reason::PermanentAllow),
        (RuleAction::Allow, Scope::Temporary) => ProxyAction::forward(Reason::TemporaryRule),
        (RuleAction::Deny, Scope::Permanent) => ProxyAction::deny(Reason::PermanentDeny),
        (RuleAction::Deny, Scope::Temporary) => ProxyAction::deny(Reason::TemporaryRule),
    }
}
