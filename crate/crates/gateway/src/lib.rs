//! One streaming completion interface over a local model runner, a hosted
//! chat-completions API and an offline mock.
//!
//! ```text
//!   select_backend(cfg) ──> Gateway ──complete()──> CompletionStream
//!                             │                      Delta* then exactly one
//!                             │                      Final | Failure
//!                             └──health_check()──> Healthy | Unhealthy
//! ```
//!
//! The gateway never retries. A [`GatewayError`] says whether retrying
//! makes sense and the caller decides.

mod config;
mod http;
pub mod mock;
pub mod sse;

use std::fmt;
use std::pin::Pin;
use std::sync::Arc;
use std::task::{Context, Poll};

use futures::stream::{BoxStream, Stream, StreamExt};
use serde::{Deserialize, Serialize};

pub use config::{BackendConfig, ConfigError, Mode, Secret, DEFAULT_MAX_TOKENS, DEFAULT_TIMEOUT_MS};
pub use mock::{Fault, MockScript, ScriptEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: ChatRole::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: ChatRole::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: ChatRole::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompletionParams {
    /// Overrides the configured limit.
    pub max_tokens: Option<u32>,
    pub temperature: Option<f32>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
    /// Set when the backend reported nothing and whitespace tokens were
    /// counted instead.
    pub approximate: bool,
}

impl Usage {
    pub fn approximate(messages: &[ChatMessage], reply: &str) -> Self {
        let count = |s: &str| s.split_whitespace().count() as u32;
        Usage {
            prompt_tokens: messages.iter().map(|m| count(&m.content)).sum(),
            completion_tokens: count(reply),
            approximate: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Timeout,
    /// 5xx, 429 or an error reported inside the stream.
    Server,
    Connection,
    Auth,
    MalformedRequest,
    /// The backend spoke something other than the expected wire format.
    Protocol,
}

impl FailureKind {
    pub fn is_retryable(self) -> bool {
        matches!(self, FailureKind::Timeout | FailureKind::Server | FailureKind::Connection)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayError {
    pub kind: FailureKind,
    pub retryable: bool,
    pub message: String,
}

impl GatewayError {
    pub fn new(kind: FailureKind, message: impl Into<String>) -> Self {
        GatewayError { kind, retryable: kind.is_retryable(), message: message.into() }
    }
}

impl fmt::Display for GatewayError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let class = if self.retryable { "retryable" } else { "fatal" };
        write!(f, "{class} {:?} failure: {}", self.kind, self.message)
    }
}

impl std::error::Error for GatewayError {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StreamEvent {
    Delta(String),
    Final { text: String, usage: Usage },
    Failure(GatewayError),
}

impl StreamEvent {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, StreamEvent::Delta(_))
    }
}

/// A completion in progress.
///
/// Whatever the backend does, the stream yields deltas followed by exactly
/// one terminal event, and a `Final` always carries the concatenation of
/// the deltas before it. Dropping the stream releases the connection.
pub struct CompletionStream {
    inner: BoxStream<'static, StreamEvent>,
    text: String,
    done: bool,
}

impl CompletionStream {
    pub fn new(inner: impl Stream<Item = StreamEvent> + Send + 'static) -> Self {
        CompletionStream { inner: inner.boxed(), text: String::new(), done: false }
    }

    pub fn from_events(events: Vec<StreamEvent>) -> Self {
        Self::new(futures::stream::iter(events))
    }

    pub fn failed(error: GatewayError) -> Self {
        Self::from_events(vec![StreamEvent::Failure(error)])
    }

    /// Drains the stream into its deltas and terminal outcome.
    pub async fn collect_all(mut self) -> (Vec<String>, Result<(String, Usage), GatewayError>) {
        let mut deltas = Vec::new();
        while let Some(ev) = self.next().await {
            match ev {
                StreamEvent::Delta(d) => deltas.push(d),
                StreamEvent::Final { text, usage } => return (deltas, Ok((text, usage))),
                StreamEvent::Failure(e) => return (deltas, Err(e)),
            }
        }
        unreachable!("guarded streams always end with a terminal event")
    }
}

impl Stream for CompletionStream {
    type Item = StreamEvent;

    fn poll_next(mut self: Pin<&mut Self>, cx: &mut Context<'_>) -> Poll<Option<StreamEvent>> {
        if self.done {
            return Poll::Ready(None);
        }
        let next = match self.inner.poll_next_unpin(cx) {
            Poll::Pending => return Poll::Pending,
            Poll::Ready(next) => next,
        };
        let out = match next {
            Some(StreamEvent::Delta(d)) => {
                self.text.push_str(&d);
                StreamEvent::Delta(d)
            }
            Some(StreamEvent::Final { text, usage }) => {
                self.done = true;
                if text == self.text {
                    StreamEvent::Final { text, usage }
                } else {
                    StreamEvent::Failure(GatewayError::new(
                        FailureKind::Protocol,
                        "final text does not match the streamed deltas",
                    ))
                }
            }
            Some(StreamEvent::Failure(e)) => {
                self.done = true;
                StreamEvent::Failure(e)
            }
            None => {
                self.done = true;
                StreamEvent::Failure(GatewayError::new(FailureKind::Connection, "stream ended before completion"))
            }
        };
        Poll::Ready(Some(out))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Health {
    Healthy,
    Unhealthy { kind: FailureKind, detail: String },
}

enum Backend {
    Mock(mock::MockBackend),
    Http(Arc<http::HttpBackend>),
}

/// A shareable handle to the configured backend.
#[derive(Clone)]
pub struct Gateway {
    mode: Mode,
    model: String,
    backend: Arc<Backend>,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway").field("mode", &self.mode).field("model", &self.model).finish()
    }
}

pub fn select_backend(cfg: BackendConfig) -> Result<Gateway, ConfigError> {
    cfg.validate()?;
    let mode = cfg.mode;
    let model = cfg.model_name.clone();
    let backend = match mode {
        Mode::Mock => Backend::Mock(mock::MockBackend::new(cfg.script.unwrap_or_default())),
        Mode::Local | Mode::Hosted => Backend::Http(Arc::new(http::HttpBackend::new(cfg)?)),
    };
    Ok(Gateway { mode, model, backend: Arc::new(backend) })
}

impl Gateway {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    /// The chat endpoint for HTTP backends.
    pub fn endpoint(&self) -> Option<&url::Url> {
        match &*self.backend {
            Backend::Http(h) => Some(h.chat_url()),
            Backend::Mock(_) => None,
        }
    }

    /// `messages` must be non-empty and start with the system prompt.
    pub fn complete(&self, messages: Vec<ChatMessage>, params: CompletionParams) -> CompletionStream {
        match messages.first() {
            None => {
                return CompletionStream::failed(GatewayError::new(FailureKind::MalformedRequest, "no messages"));
            }
            Some(m) if m.role != ChatRole::System => {
                return CompletionStream::failed(GatewayError::new(
                    FailureKind::MalformedRequest,
                    "the first message must be the system prompt",
                ));
            }
            Some(_) => {}
        }
        match &*self.backend {
            Backend::Mock(m) => m.complete(&messages),
            Backend::Http(h) => h.complete(messages, params),
        }
    }

    pub async fn health_check(&self) -> Health {
        match &*self.backend {
            Backend::Mock(_) => Health::Healthy,
            Backend::Http(h) => h.health().await,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(events: Vec<StreamEvent>) -> Vec<StreamEvent> {
        futures::executor::block_on(CompletionStream::from_events(events).collect())
    }

    #[test]
    fn missing_terminal_becomes_failure() {
        let out = run(vec![StreamEvent::Delta("a".into())]);
        assert!(matches!(&out[1], StreamEvent::Failure(e) if e.kind == FailureKind::Connection && e.retryable));
    }

    #[test]
    fn events_after_terminal_are_dropped() {
        let usage = Usage::default();
        let out = run(vec![
            StreamEvent::Final { text: String::new(), usage },
            StreamEvent::Delta("late".into()),
            StreamEvent::Final { text: "late".into(), usage },
        ]);
        assert_eq!(out, [StreamEvent::Final { text: String::new(), usage }]);
    }

    #[test]
    fn mismatched_final_is_a_protocol_failure() {
        let out = run(vec![
            StreamEvent::Delta("a".into()),
            StreamEvent::Final { text: "ab".into(), usage: Usage::default() },
        ]);
        assert!(matches!(&out[1], StreamEvent::Failure(e) if e.kind == FailureKind::Protocol && !e.retryable));
    }

    #[test]
    fn taxonomy() {
        for k in [FailureKind::Timeout, FailureKind::Server, FailureKind::Connection] {
            assert!(k.is_retryable());
        }
        for k in [FailureKind::Auth, FailureKind::MalformedRequest, FailureKind::Protocol] {
            assert!(!k.is_retryable());
        }
    }

    #[test]
    fn first_message_must_be_system() {
        let gw = select_backend(BackendConfig::mock()).unwrap();
        let (_, res) = futures::executor::block_on(gw.complete(vec![ChatMessage::user("hi")], Default::default()).collect_all());
        assert_eq!(res.unwrap_err().kind, FailureKind::MalformedRequest);
        let (_, res) = futures::executor::block_on(gw.complete(vec![], Default::default()).collect_all());
        assert_eq!(res.unwrap_err().kind, FailureKind::MalformedRequest);
    }
}
