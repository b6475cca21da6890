use std::collections::{HashMap, HashSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::ids::{DocId, EventId, LearnerId, SupportId};
use crate::model::GoalType;
use crate::tutor::Phase;
use crate::TimestampMs;

pub const EVENT_SCHEMA_VERSION: u32 = 1;

/// Onboarding wizard step, numbered from 1.
pub type WizardStep = u8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum EngagementKind {
    StepEntered { step: WizardStep },
    StepExited { step: WizardStep },
    FieldEdited { field: String, text_length: u32 },
    MaterialUploaded { doc_id: DocId },
    GoalTypeSelected { goal: GoalType },
    DatesSelected { start: Option<NaiveDate>, end: Option<NaiveDate> },
    SessionPhaseChanged { phase: Phase },
    QuizCompleted { score: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngagementEvent {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub event_id: EventId,
    pub learner_id: LearnerId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_id: Option<SupportId>,
    pub kind: EngagementKind,
    pub at: TimestampMs,
}

fn schema_version() -> u32 {
    EVENT_SCHEMA_VERSION
}

impl EngagementEvent {
    pub fn new(
        event_id: EventId,
        learner_id: LearnerId,
        support_id: Option<SupportId>,
        kind: EngagementKind,
        at: TimestampMs,
    ) -> Self {
        EngagementEvent { schema_version: EVENT_SCHEMA_VERSION, event_id, learner_id, support_id, kind, at }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordOutcome {
    Accepted { late: bool },
    DuplicateIgnored,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredEvent {
    pub event: EngagementEvent,
    /// Arrived with a timestamp earlier than the learner's latest event.
    pub late: bool,
}

/// Append-only event store with duplicate suppression by event id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    events: Vec<StoredEvent>,
    ids: HashSet<EventId>,
    latest: HashMap<LearnerId, TimestampMs>,
}

/// A line of a JSON-lines log that could not be read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorruptLine {
    pub line_number: usize,
    pub error: String,
}

impl EventLog {
    pub fn new() -> Self {
        EventLog::default()
    }

    pub fn record_event(&mut self, event: EngagementEvent) -> RecordOutcome {
        if !self.ids.insert(event.event_id.clone()) {
            return RecordOutcome::DuplicateIgnored;
        }
        let latest = self.latest.entry(event.learner_id.clone()).or_insert(event.at);
        let late = event.at < *latest;
        *latest = (*latest).max(event.at);
        self.events.push(StoredEvent { event, late });
        RecordOutcome::Accepted { late }
    }

    pub fn contains(&self, event_id: &EventId) -> bool {
        self.ids.contains(event_id)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn stored(&self) -> &[StoredEvent] {
        &self.events
    }

    pub fn events(&self) -> impl Iterator<Item = &EngagementEvent> {
        self.events.iter().map(|s| &s.event)
    }

    pub fn for_learner<'a>(&'a self, learner: &'a LearnerId) -> impl Iterator<Item = &'a EngagementEvent> + 'a {
        self.events().filter(move |e| &e.learner_id == learner)
    }

    pub fn for_support<'a>(&'a self, support: &'a SupportId) -> impl Iterator<Item = &'a EngagementEvent> + 'a {
        self.events().filter(move |e| e.support_id.as_ref() == Some(support))
    }

    /// Rebuilds a log from JSON lines. Blank lines are skipped; unreadable
    /// lines are reported and skipped.
    pub fn replay_jsonl(text: &str) -> (EventLog, Vec<CorruptLine>) {
        let mut log = EventLog::new();
        let mut corrupt = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<EngagementEvent>(line) {
                Ok(ev) => {
                    log.record_event(ev);
                }
                Err(e) => corrupt.push(CorruptLine { line_number: i + 1, error: e.to_string() }),
            }
        }
        (log, corrupt)
    }

    pub fn to_jsonl(&self) -> String {
        self.events().map(|e| e.to_json_line() + "\n").collect()
    }
}
