//! Review sessions and their append-only event logs.

use std::collections::BTreeMap;

use dataref_core::detector::Span;
use dataref_core::dictionary::Feature;
use dataref_core::RankedMatch;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Workflow {
    PerReference,
    PerFeature,
}

/// One decision unit: a reference (per-reference workflow) or a feature
/// group (per-feature workflow), with the candidates offered for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionItem {
    pub item: usize,
    pub feature: Feature,
    /// Indices into the article's reference list.
    pub references: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_span: Option<Span>,
    pub candidates: Vec<RankedMatch>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    Dataset(String),
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Created {
        session_id: String,
        article_id: String,
        workflow: Workflow,
        items: Vec<SessionItem>,
    },
    Decision {
        item: usize,
        choice: Choice,
    },
    Undo {
        item: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReviewSession {
    pub session_id: String,
    pub article_id: String,
    pub workflow: Workflow,
    pub items: Vec<SessionItem>,
    pub decisions: BTreeMap<usize, Choice>,
}

#[derive(Debug, Serialize)]
pub struct SessionView<'a> {
    #[serde(flatten)]
    pub session: &'a ReviewSession,
    pub pending: Vec<usize>,
    pub complete: bool,
}

impl ReviewSession {
    /// Rebuilds a session from its log. The first event must be `created`.
    pub fn replay(events: impl IntoIterator<Item = SessionEvent>) -> Result<Self, ApiError> {
        let mut events = events.into_iter();
        let mut session = match events.next() {
            Some(SessionEvent::Created {
                session_id,
                article_id,
                workflow,
                items,
            }) => Self {
                session_id,
                article_id,
                workflow,
                items,
                decisions: BTreeMap::new(),
            },
            _ => {
                return Err(ApiError::internal(
                    "session log does not start with a created event",
                ))
            }
        };
        for event in events {
            session.apply(&event)?;
        }
        Ok(session)
    }

    /// Checks an event against the current state without applying it.
    pub fn check(&self, event: &SessionEvent) -> Result<(), ApiError> {
        match event {
            SessionEvent::Created { .. } => Err(ApiError::internal("session already created")),
            SessionEvent::Decision { item, choice } => {
                let offered = self.items.get(*item).ok_or_else(|| {
                    ApiError::bad_request(format!("item {item} was not offered in this session"))
                })?;
                if let Choice::Dataset(doi) = choice {
                    if !offered.candidates.iter().any(|c| &c.doi == doi) {
                        return Err(ApiError::bad_request(format!(
                            "DOI {doi:?} is not among the candidates of item {item}"
                        )));
                    }
                }
                if self.decisions.contains_key(item) {
                    return Err(ApiError::conflict(format!(
                        "item {item} is already decided"
                    )));
                }
                Ok(())
            }
            SessionEvent::Undo { item } => {
                if *item >= self.items.len() {
                    return Err(ApiError::bad_request(format!(
                        "item {item} was not offered in this session"
                    )));
                }
                if !self.decisions.contains_key(item) {
                    return Err(ApiError::conflict(format!(
                        "item {item} has no decision to undo"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn apply(&mut self, event: &SessionEvent) -> Result<(), ApiError> {
        self.check(event)?;
        match event {
            SessionEvent::Decision { item, choice } => {
                self.decisions.insert(*item, choice.clone());
            }
            SessionEvent::Undo { item } => {
                self.decisions.remove(item);
            }
            SessionEvent::Created { .. } => unreachable!("rejected by check"),
        }
        Ok(())
    }

    pub fn pending(&self) -> Vec<usize> {
        self.items
            .iter()
            .map(|i| i.item)
            .filter(|i| !self.decisions.contains_key(i))
            .collect()
    }

    pub fn view(&self) -> SessionView<'_> {
        let pending = self.pending();
        SessionView {
            session: self,
            complete: pending.is_empty(),
            pending,
        }
    }

    /// Confirmed `(item, doi)` pairs.
    pub fn confirmed(&self) -> impl Iterator<Item = (&SessionItem, &str)> {
        self.decisions
            .iter()
            .filter_map(|(item, choice)| match choice {
                Choice::Dataset(doi) => Some((&self.items[*item], doi.as_str())),
                Choice::Rejected => None,
            })
    }
}
