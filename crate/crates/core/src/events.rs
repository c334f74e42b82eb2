//! Raw interaction events and participant filtering.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

/// Order direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    /// Parses the log codes `B` / `S`.
    pub fn from_code(code: &str) -> Option<Side> {
        match code {
            "B" => Some(Side::Buy),
            "S" => Some(Side::Sell),
            _ => None,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Side::Buy => "B",
            Side::Sell => "S",
        }
    }
}

/// One submitted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderEvent {
    pub investor_id: String,
    pub stock_id: String,
    pub side: Side,
    /// Seconds since the epoch.
    pub timestamp: u64,
}

/// One phone call. Self-calls are never constructed by the parsers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallEvent {
    pub caller_id: String,
    pub callee_id: String,
    pub timestamp: u64,
}

/// Access to the ids taking part in an event.
pub trait Participants {
    fn involves(&self, pred: &dyn Fn(&str) -> bool) -> bool;
}

impl Participants for OrderEvent {
    fn involves(&self, pred: &dyn Fn(&str) -> bool) -> bool {
        pred(&self.investor_id)
    }
}

impl Participants for CallEvent {
    fn involves(&self, pred: &dyn Fn(&str) -> bool) -> bool {
        pred(&self.caller_id) || pred(&self.callee_id)
    }
}

/// Externally supplied ids to drop (robots, fraud, telemarketing).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Blocklist {
    excluded: BTreeSet<String>,
}

impl Blocklist {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>) {
        self.excluded.insert(id.into());
    }

    pub fn contains(&self, id: &str) -> bool {
        self.excluded.contains(id)
    }

    pub fn len(&self) -> usize {
        self.excluded.len()
    }

    pub fn is_empty(&self) -> bool {
        self.excluded.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Blocklist {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Blocklist {
            excluded: iter.into_iter().map(Into::into).collect(),
        }
    }
}

/// Drops every event with a blocklisted participant, keeping relative order.
pub fn apply_blocklist<E: Participants>(events: Vec<E>, blocklist: &Blocklist) -> Vec<E> {
    if blocklist.is_empty() {
        return events;
    }
    events
        .into_iter()
        .filter(|e| !e.involves(&|id| blocklist.contains(id)))
        .collect()
}
