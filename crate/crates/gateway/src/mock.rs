//! Deterministic offline backend.
//!
//! Without a script every reply is `mock:` followed by the last user
//! message. A script is a JSON list of `{match, reply}` entries; the first
//! entry whose `match` occurs in the last user message wins, and unmatched
//! messages fall back to the echo.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{ChatMessage, ChatRole, CompletionStream, ConfigError, FailureKind, GatewayError, StreamEvent, Usage};

/// A failure injected into a scripted reply after some deltas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fault {
    pub after_deltas: usize,
    pub kind: FailureKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(rename = "match")]
    pub pattern: String,
    pub reply: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MockScript {
    pub entries: Vec<ScriptEntry>,
}

impl MockScript {
    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let fail = |reason: String| ConfigError::Script { path: path.to_owned(), reason };
        let text = std::fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
        Self::from_json(&text).map_err(|e| fail(e.to_string()))
    }

    pub fn find(&self, user_message: &str) -> Option<&ScriptEntry> {
        self.entries.iter().find(|e| user_message.contains(&e.pattern))
    }
}

pub(crate) struct MockBackend {
    script: MockScript,
}

/// Splits a reply into the two deltas the mock streams. Empty pieces are
/// left out.
pub fn split_reply(reply: &str, echo_prefix: Option<usize>) -> Vec<String> {
    let cut = echo_prefix.unwrap_or_else(|| {
        let mid = reply.len() / 2;
        (mid..=reply.len()).find(|i| reply.is_char_boundary(*i)).unwrap_or(reply.len())
    });
    [&reply[..cut], &reply[cut..]].into_iter().filter(|s| !s.is_empty()).map(str::to_owned).collect()
}

impl MockBackend {
    pub(crate) fn new(script: MockScript) -> Self {
        MockBackend { script }
    }

    /// Reply, prefix split point and fault for a conversation.
    fn reply(&self, messages: &[ChatMessage]) -> (String, Option<usize>, Option<Fault>) {
        let last_user = messages.iter().rev().find(|m| m.role == ChatRole::User).map_or("", |m| m.content.as_str());
        match self.script.find(last_user) {
            Some(entry) => (entry.reply.clone(), None, entry.fault),
            None => (format!("mock:{last_user}"), Some("mock:".len()), None),
        }
    }

    pub(crate) fn complete(&self, messages: &[ChatMessage]) -> CompletionStream {
        let (reply, prefix, fault) = self.reply(messages);
        let deltas = split_reply(&reply, prefix);
        let mut events = Vec::new();
        let mut sent = String::new();
        for (i, d) in deltas.into_iter().enumerate() {
            if let Some(f) = fault.filter(|f| f.after_deltas == i) {
                events.push(StreamEvent::Failure(GatewayError::new(f.kind, "injected fault")));
                return CompletionStream::from_events(events);
            }
            sent.push_str(&d);
            events.push(StreamEvent::Delta(d));
        }
        if let Some(f) = fault {
            events.push(StreamEvent::Failure(GatewayError::new(f.kind, "injected fault")));
            return CompletionStream::from_events(events);
        }
        let usage = Usage::approximate(messages, &sent);
        events.push(StreamEvent::Final { text: sent, usage });
        CompletionStream::from_events(events)
    }
}
