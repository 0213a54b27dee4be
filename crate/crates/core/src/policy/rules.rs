//! Filter rules and the rule store.
//!
//! Temporary rules belong to a page context and disappear with it. Permanent
//! rules are mirrored to a JSON-lines file that is rewritten atomically on
//! every change.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{RuleError, RulesFileError};
use crate::extract::LinkInventory;
use crate::ids::{ContextId, RuleId};
use crate::policy::domain::registrable_domain;
use crate::url::AbsoluteUrl;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternKind {
    Exact,
    Prefix,
    Domain,
}

impl PatternKind {
    /// Higher wins within a tier.
    fn specificity(self) -> u8 {
        match self {
            PatternKind::Exact => 3,
            PatternKind::Prefix => 2,
            PatternKind::Domain => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RulePattern {
    pub kind: PatternKind,
    pub value: String,
}

impl RulePattern {
    pub fn exact(url: &AbsoluteUrl) -> Self {
        RulePattern {
            kind: PatternKind::Exact,
            value: url.as_str().to_owned(),
        }
    }

    pub fn prefix(prefix: impl Into<String>) -> Self {
        RulePattern {
            kind: PatternKind::Prefix,
            value: prefix.into(),
        }
    }

    /// Pattern matching every URL under `host`'s registrable domain.
    pub fn domain(host: &str) -> Self {
        RulePattern {
            kind: PatternKind::Domain,
            value: registrable_domain(host).as_str().to_owned(),
        }
    }

    /// Canonical form: exact URLs reparsed, domains reduced to their key.
    pub fn normalized(self) -> Self {
        match self.kind {
            PatternKind::Exact => match AbsoluteUrl::parse(&self.value) {
                Ok(u) => RulePattern::exact(&u),
                Err(_) => self,
            },
            PatternKind::Domain => RulePattern::domain(&self.value),
            PatternKind::Prefix => self,
        }
    }

    pub fn matches(&self, url: &AbsoluteUrl) -> bool {
        match self.kind {
            PatternKind::Exact => url.as_str() == self.value,
            PatternKind::Prefix => url.as_str().starts_with(&self.value),
            PatternKind::Domain => registrable_domain(url.host()).as_str() == self.value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleAction {
    Allow,
    Deny,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Lifetime {
    Temporary { owner: ContextId },
    Permanent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleOrigin {
    AutoExtracted,
    UserDecision,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FilterRule {
    pub id: RuleId,
    pub pattern: RulePattern,
    pub action: RuleAction,
    pub lifetime: Lifetime,
    pub origin: RuleOrigin,
    pub created_at: DateTime<Utc>,
}

impl FilterRule {
    pub fn is_temporary_for(&self, ctx: ContextId) -> bool {
        self.lifetime == Lifetime::Temporary { owner: ctx }
    }

    pub fn is_permanent(&self) -> bool {
        self.lifetime == Lifetime::Permanent
    }

    fn precedence_key(&self) -> (std::cmp::Reverse<u8>, DateTime<Utc>, RuleId) {
        (
            std::cmp::Reverse(self.pattern.kind.specificity()),
            self.created_at,
            self.id,
        )
    }
}

/// One line of the permanent rules file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersistedRule {
    pub pattern: RulePattern,
    pub action: RuleAction,
    pub created_at: String,
}

/// Rule request without id or timestamp.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewRule {
    pub pattern: RulePattern,
    pub action: RuleAction,
    pub lifetime: Lifetime,
    pub origin: RuleOrigin,
}

#[derive(Debug, Default)]
pub struct RuleStore {
    rules: BTreeMap<RuleId, FilterRule>,
    by_context: HashMap<ContextId, Vec<RuleId>>,
    auto_allowed: HashSet<(ContextId, AbsoluteUrl)>,
    next_id: u64,
    path: Option<PathBuf>,
}

impl RuleStore {
    /// In-memory store with no rules file.
    pub fn new() -> Self {
        RuleStore::default()
    }

    /// Loads permanent rules from `path`; a missing file is an empty store.
    /// Later changes to permanent rules are written back to the same file.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, RulesFileError> {
        let path = path.into();
        let mut store = RuleStore {
            path: Some(path.clone()),
            ..RuleStore::default()
        };
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(store),
            Err(source) => return Err(RulesFileError::Io { path, source }),
        };
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let persisted: PersistedRule =
                serde_json::from_str(line).map_err(|source| RulesFileError::Parse {
                    path: path.clone(),
                    line: idx + 1,
                    source,
                })?;
            let created_at = DateTime::parse_from_rfc3339(&persisted.created_at)
                .map(|t| t.with_timezone(&Utc))
                .map_err(|e| RulesFileError::Parse {
                    path: path.clone(),
                    line: idx + 1,
                    source: serde::de::Error::custom(e),
                })?;
            store.insert(
                NewRule {
                    pattern: persisted.pattern.normalized(),
                    action: persisted.action,
                    lifetime: Lifetime::Permanent,
                    origin: RuleOrigin::UserDecision,
                },
                created_at,
            );
        }
        Ok(store)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn get(&self, id: RuleId) -> Option<&FilterRule> {
        self.rules.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &FilterRule> {
        self.rules.values()
    }

    pub fn permanent(&self) -> impl Iterator<Item = &FilterRule> {
        self.rules.values().filter(|r| r.is_permanent())
    }

    pub fn temporary(&self, ctx: ContextId) -> impl Iterator<Item = &FilterRule> {
        self.by_context
            .get(&ctx)
            .into_iter()
            .flatten()
            .filter_map(|id| self.rules.get(id))
    }

    fn insert(&mut self, rule: NewRule, created_at: DateTime<Utc>) -> RuleId {
        self.next_id += 1;
        let id = RuleId(self.next_id);
        if let Lifetime::Temporary { owner } = rule.lifetime {
            self.by_context.entry(owner).or_default().push(id);
            if rule.origin == RuleOrigin::AutoExtracted
                && rule.action == RuleAction::Allow
                && rule.pattern.kind == PatternKind::Exact
            {
                if let Ok(url) = AbsoluteUrl::parse(&rule.pattern.value) {
                    self.auto_allowed.insert((owner, url));
                }
            }
        }
        self.rules.insert(
            id,
            FilterRule {
                id,
                pattern: rule.pattern,
                action: rule.action,
                lifetime: rule.lifetime,
                origin: rule.origin,
                created_at,
            },
        );
        id
    }

    /// Adds a rule, persisting the file when the rule is permanent.
    pub fn add(&mut self, rule: NewRule) -> Result<&FilterRule, RuleError> {
        let permanent = rule.lifetime == Lifetime::Permanent;
        let rule = NewRule {
            pattern: rule.pattern.normalized(),
            ..rule
        };
        let id = self.insert(rule, Utc::now());
        if permanent {
            if let Err(e) = self.save() {
                self.rules.remove(&id);
                return Err(e.into());
            }
        }
        Ok(&self.rules[&id])
    }

    pub fn remove(&mut self, id: RuleId) -> Result<FilterRule, RuleError> {
        let rule = self.rules.remove(&id).ok_or(RuleError::NotFound(id.0))?;
        match rule.lifetime {
            Lifetime::Permanent => {
                if let Err(e) = self.save() {
                    self.rules.insert(id, rule);
                    return Err(e.into());
                }
            }
            Lifetime::Temporary { owner } => {
                if let Some(ids) = self.by_context.get_mut(&owner) {
                    ids.retain(|r| *r != id);
                }
                if rule.origin == RuleOrigin::AutoExtracted {
                    if let Ok(url) = AbsoluteUrl::parse(&rule.pattern.value) {
                        self.auto_allowed.remove(&(owner, url));
                    }
                }
            }
        }
        Ok(rule)
    }

    /// Removes every temporary rule owned by `ctx`; returns how many.
    pub fn drop_context(&mut self, ctx: ContextId) -> usize {
        let ids = self.by_context.remove(&ctx).unwrap_or_default();
        for id in &ids {
            self.rules.remove(id);
        }
        self.auto_allowed.retain(|(owner, _)| *owner != ctx);
        ids.len()
    }

    /// One temporary exact-URL allow rule per external link of `inv`, owned
    /// by `ctx`. Links that already have one are skipped. Returns the number
    /// of auto-extracted rules `ctx` now holds for `inv`'s links.
    pub fn register_temporary_rules(&mut self, inv: &LinkInventory, ctx: ContextId) -> usize {
        let now = Utc::now();
        for link in &inv.external_links {
            if !self.auto_allowed.contains(&(ctx, link.clone())) {
                self.insert(
                    NewRule {
                        pattern: RulePattern::exact(link),
                        action: RuleAction::Allow,
                        lifetime: Lifetime::Temporary { owner: ctx },
                        origin: RuleOrigin::AutoExtracted,
                    },
                    now,
                );
            }
        }
        inv.external_links
            .iter()
            .filter(|l| self.auto_allowed.contains(&(ctx, (*l).clone())))
            .count()
    }

    /// Whether `ctx` holds an auto-extracted allow rule for exactly `url`.
    pub fn has_auto_rule(&self, ctx: ContextId, url: &AbsoluteUrl) -> bool {
        self.auto_allowed.contains(&(ctx, url.clone()))
    }

    /// Best matching rule: the context's temporary rules first, then
    /// permanent rules. Within a tier exact beats prefix beats domain, and
    /// ties go to the oldest rule.
    pub fn match_rule(&self, url: &AbsoluteUrl, ctx: Option<ContextId>) -> Option<&FilterRule> {
        if let Some(ctx) = ctx {
            let best = self
                .temporary(ctx)
                .filter(|r| r.pattern.matches(url))
                .min_by_key(|r| r.precedence_key());
            if best.is_some() {
                return best;
            }
        }
        self.match_permanent(url)
    }

    pub fn match_permanent(&self, url: &AbsoluteUrl) -> Option<&FilterRule> {
        self.permanent()
            .filter(|r| r.pattern.matches(url))
            .min_by_key(|r| r.precedence_key())
    }

    /// Rewrites the rules file with the current permanent rules.
    pub fn save(&self) -> Result<(), RulesFileError> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let mut out = String::new();
        for rule in self.permanent() {
            let line = PersistedRule {
                pattern: rule.pattern.clone(),
                action: rule.action,
                created_at: rule.created_at.to_rfc3339_opts(SecondsFormat::Millis, true),
            };
            out.push_str(&serde_json::to_string(&line).expect("rule serializes"));
            out.push('\n');
        }
        write_atomically(path, out.as_bytes()).map_err(|source| RulesFileError::Io {
            path: path.clone(),
            source,
        })
    }
}

fn write_atomically(path: &Path, contents: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(contents)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)
}
