//! Connection alerts: requests held for an operator decision.

use std::collections::{BTreeMap, VecDeque};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tokio::sync::oneshot;

use crate::error::AlertError;
use crate::ids::{AlertId, ContextId};
use crate::policy::{PatternKind, RuleAction};
use crate::url::AbsoluteUrl;

const HISTORY_LEN: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    /// Rule lives as long as the ticket's page context.
    Temporary,
    Permanent,
}

/// An operator's answer to a ticket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub action: RuleAction,
    pub scope: Scope,
    /// Shape of the rule to create. Defaults to a domain rule for permanent
    /// decisions and an exact-URL rule for temporary ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<PatternKind>,
}

impl Verdict {
    pub fn pattern_kind(&self) -> PatternKind {
        self.pattern.unwrap_or(match self.scope {
            Scope::Permanent => PatternKind::Domain,
            Scope::Temporary => PatternKind::Exact,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum TicketState {
    Pending,
    Decided { action: RuleAction, scope: Scope },
    /// Timed out or refused by a full queue; resolves as deny.
    Expired,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlertTicket {
    pub id: AlertId,
    pub request_url: AbsoluteUrl,
    pub referrer: Option<AbsoluteUrl>,
    pub context_id: Option<ContextId>,
    pub created_at: DateTime<Utc>,
    pub state: TicketState,
}

/// Receiving half handed to the held request.
#[derive(Debug)]
pub struct PendingAlert {
    pub id: AlertId,
    pub receiver: oneshot::Receiver<Verdict>,
}

#[derive(Debug)]
pub struct AlertQueue {
    pending: BTreeMap<AlertId, (AlertTicket, oneshot::Sender<Verdict>)>,
    history: VecDeque<AlertTicket>,
    cap: usize,
    next_id: u64,
}

pub enum Enqueued {
    Held(PendingAlert),
    /// The queue was full; the ticket was expired on arrival.
    Refused(AlertTicket),
}

impl AlertQueue {
    pub fn new(cap: usize) -> Self {
        AlertQueue {
            pending: BTreeMap::new(),
            history: VecDeque::new(),
            cap,
            next_id: 0,
        }
    }

    pub fn enqueue(
        &mut self,
        request_url: AbsoluteUrl,
        referrer: Option<AbsoluteUrl>,
        context_id: Option<ContextId>,
    ) -> Enqueued {
        self.next_id += 1;
        let id = AlertId(self.next_id);
        let mut ticket = AlertTicket {
            id,
            request_url,
            referrer,
            context_id,
            created_at: Utc::now(),
            state: TicketState::Pending,
        };
        if self.pending.len() >= self.cap {
            ticket.state = TicketState::Expired;
            self.remember(ticket.clone());
            return Enqueued::Refused(ticket);
        }
        let (tx, rx) = oneshot::channel();
        self.pending.insert(id, (ticket, tx));
        Enqueued::Held(PendingAlert { id, receiver: rx })
    }

    pub fn pending(&self) -> impl Iterator<Item = &AlertTicket> {
        self.pending.values().map(|(t, _)| t)
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn get(&self, id: AlertId) -> Option<&AlertTicket> {
        self.pending
            .get(&id)
            .map(|(t, _)| t)
            .or_else(|| self.history.iter().rev().find(|t| t.id == id))
    }

    /// Resolved tickets, oldest first.
    pub fn history(&self) -> impl Iterator<Item = &AlertTicket> {
        self.history.iter()
    }

    /// Records the operator's verdict and wakes the held request.
    pub fn decide(&mut self, id: AlertId, verdict: Verdict) -> Result<AlertTicket, AlertError> {
        let Some((mut ticket, tx)) = self.pending.remove(&id) else {
            return Err(if self.get(id).is_some() {
                AlertError::AlreadyResolved(id.0)
            } else {
                AlertError::NotFound(id.0)
            });
        };
        ticket.state = TicketState::Decided {
            action: verdict.action,
            scope: verdict.scope,
        };
        // The held request may have given up already; the decision stands.
        let _ = tx.send(verdict);
        self.remember(ticket.clone());
        Ok(ticket)
    }

    /// Expires a still-pending ticket. Returns `None` if it was resolved in
    /// the meantime.
    pub fn expire(&mut self, id: AlertId) -> Option<AlertTicket> {
        let (mut ticket, _) = self.pending.remove(&id)?;
        ticket.state = TicketState::Expired;
        self.remember(ticket.clone());
        Some(ticket)
    }

    fn remember(&mut self, ticket: AlertTicket) {
        if self.history.len() == HISTORY_LEN {
            self.history.pop_front();
        }
        self.history.push_back(ticket);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn url(s: &str) -> AbsoluteUrl {
        AbsoluteUrl::parse(s).unwrap()
    }

    fn allow_permanent() -> Verdict {
        Verdict {
            action: RuleAction::Allow,
            scope: Scope::Permanent,
            pattern: None,
        }
    }

    #[test]
    fn decided_ticket_leaves_pending_list() {
        let mut q = AlertQueue::new(4);
        let Enqueued::Held(mut held) = q.enqueue(url("http://evil.com/steal-cookie.php"), None, None) else {
            panic!("queue has room");
        };
        assert_eq!(q.pending().count(), 1);
        q.decide(held.id, allow_permanent()).unwrap();
        assert_eq!(q.pending().count(), 0);
        assert_eq!(held.receiver.try_recv().unwrap().action, RuleAction::Allow);
        assert_eq!(
            q.decide(held.id, allow_permanent()),
            Err(AlertError::AlreadyResolved(held.id.0))
        );
        assert_eq!(q.decide(AlertId(99), allow_permanent()), Err(AlertError::NotFound(99)));
    }

    #[test]
    fn full_queue_refuses() {
        let mut q = AlertQueue::new(256);
        for i in 0..256 {
            assert!(matches!(
                q.enqueue(url(&format!("http://evil.com/{i}")), None, None),
                Enqueued::Held(_)
            ));
        }
        match q.enqueue(url("http://evil.com/257"), None, None) {
            Enqueued::Refused(t) => assert_eq!(t.state, TicketState::Expired),
            Enqueued::Held(_) => panic!("257th ticket must be refused"),
        }
        assert_eq!(q.pending_len(), 256);
    }

    #[test]
    fn expire_after_decide_is_noop() {
        let mut q = AlertQueue::new(4);
        let Enqueued::Held(held) = q.enqueue(url("http://evil.com/"), None, None) else {
            panic!()
        };
        q.decide(held.id, allow_permanent()).unwrap();
        assert!(q.expire(held.id).is_none());
        assert!(matches!(q.get(held.id).unwrap().state, TicketState::Decided { .. }));
    }

    #[test]
    fn default_pattern_kinds() {
        assert_eq!(allow_permanent().pattern_kind(), PatternKind::Domain);
        let temp = Verdict {
            action: RuleAction::Deny,
            scope: Scope::Temporary,
            pattern: None,
        };
        assert_eq!(temp.pattern_kind(), PatternKind::Exact);
    }
}
