//! Chat-completions over HTTP, shared by the local and hosted modes.

use std::collections::VecDeque;
use std::sync::Arc;
use std::time::Duration;

use futures::stream::{BoxStream, StreamExt};
use reqwest::StatusCode;
use serde_json::json;
use url::Url;

use crate::config::{BackendConfig, ConfigError, Secret};
use crate::sse::{parse_chunk, Chunk, ChunkError, SseDecoder};
use crate::{ChatMessage, CompletionParams, CompletionStream, FailureKind, GatewayError, Health, Mode, StreamEvent, Usage};

/// How much of an error body is quoted in messages.
const BODY_SNIPPET: usize = 200;

pub(crate) struct HttpBackend {
    client: reqwest::Client,
    mode: Mode,
    model: String,
    api_key: Option<Secret>,
    timeout: Duration,
    max_tokens: u32,
    chat_url: Url,
    models_url: Url,
}

fn endpoint(base: &Url, path: &str) -> Result<Url, ConfigError> {
    let mut base = base.clone();
    let trimmed = base.path().trim_end_matches('/').to_owned();
    let prefix = if trimmed.ends_with("/v1") { trimmed } else { format!("{trimmed}/v1") };
    base.set_path(&format!("{prefix}/{path}"));
    Ok(base)
}

impl HttpBackend {
    pub(crate) fn new(cfg: BackendConfig) -> Result<Self, ConfigError> {
        let base = cfg.base_url.as_ref().ok_or(ConfigError::InvalidConfig("base_url"))?;
        let timeout = Duration::from_millis(cfg.timeout_ms);
        let client = reqwest::Client::builder()
            .connect_timeout(timeout)
            .build()
            .map_err(|_| ConfigError::InvalidConfig("base_url"))?;
        Ok(HttpBackend {
            client,
            mode: cfg.mode,
            model: cfg.model_name.clone(),
            chat_url: endpoint(base, "chat/completions")?,
            models_url: endpoint(base, "models")?,
            api_key: cfg.api_key,
            timeout,
            max_tokens: cfg.max_tokens,
        })
    }

    pub(crate) fn chat_url(&self) -> &Url {
        &self.chat_url
    }

    fn redact(&self, text: &str) -> String {
        match &self.api_key {
            Some(k) => k.redact(text),
            None => text.to_owned(),
        }
    }

    fn error(&self, kind: FailureKind, message: impl AsRef<str>) -> GatewayError {
        let e = GatewayError::new(kind, self.redact(message.as_ref()));
        tracing::warn!(mode = ?self.mode, error = %e, "completion failed");
        e
    }

    fn authorized(&self, req: reqwest::RequestBuilder) -> reqwest::RequestBuilder {
        match &self.api_key {
            Some(k) => req.bearer_auth(k.expose()),
            None => req,
        }
    }

    fn transport_error(&self, e: &reqwest::Error) -> GatewayError {
        let kind = if e.is_timeout() { FailureKind::Timeout } else { FailureKind::Connection };
        // reqwest errors carry the URL but never headers
        self.error(kind, e.to_string())
    }

    async fn status_error(&self, resp: reqwest::Response) -> GatewayError {
        let status = resp.status();
        let kind = status_kind(status);
        let body = resp.text().await.unwrap_or_default();
        let snippet: String = body.chars().take(BODY_SNIPPET).collect();
        self.error(kind, format!("backend answered {status}: {snippet}"))
    }

    pub(crate) fn complete(self: &Arc<Self>, messages: Vec<ChatMessage>, params: CompletionParams) -> CompletionStream {
        let mut body = json!({
            "model": self.model,
            "messages": messages,
            "stream": true,
            "max_tokens": params.max_tokens.unwrap_or(self.max_tokens),
            "stream_options": {"include_usage": true},
        });
        if let Some(t) = params.temperature {
            body["temperature"] = json!(t);
        }
        tracing::debug!(mode = ?self.mode, url = %self.chat_url, messages = messages.len(), "completion request");
        let request = self.authorized(self.client.post(self.chat_url.clone())).json(&body);
        let state = Reading::Start { request, messages };
        let this = Arc::clone(self);
        CompletionStream::new(futures::stream::unfold((state, this), |(state, this)| async move {
            let (event, next) = step(&this, state).await?;
            Some((event, (next, this)))
        }))
    }

    pub(crate) async fn health(&self) -> Health {
        let req = self.authorized(self.client.get(self.models_url.clone()));
        let unhealthy = |e: GatewayError| Health::Unhealthy { kind: e.kind, detail: e.message };
        match tokio::time::timeout(self.timeout, req.send()).await {
            Err(_) => unhealthy(self.error(FailureKind::Timeout, "model list probe timed out")),
            Ok(Err(e)) => unhealthy(self.transport_error(&e)),
            Ok(Ok(resp)) if resp.status().is_success() => Health::Healthy,
            Ok(Ok(resp)) => unhealthy(self.status_error(resp).await),
        }
    }
}

fn status_kind(status: StatusCode) -> FailureKind {
    match status.as_u16() {
        401 | 403 => FailureKind::Auth,
        408 => FailureKind::Timeout,
        429 => FailureKind::Server,
        s if s >= 500 => FailureKind::Server,
        _ => FailureKind::MalformedRequest,
    }
}

enum Reading {
    Start {
        request: reqwest::RequestBuilder,
        messages: Vec<ChatMessage>,
    },
    Body {
        bytes: BoxStream<'static, reqwest::Result<bytes::Bytes>>,
        decoder: SseDecoder,
        pending: VecDeque<StreamEvent>,
        messages: Vec<ChatMessage>,
        text: String,
        usage: Option<Usage>,
        finished: bool,
        eof: bool,
    },
    Done,
}

type Backend = Arc<HttpBackend>;

async fn step(this: &Backend, state: Reading) -> Option<(StreamEvent, Reading)> {
    let mut state = state;
    loop {
        state = match state {
            Reading::Done => return None,
            Reading::Start { request, messages } => {
                let resp = match tokio::time::timeout(this.timeout, request.send()).await {
                    Err(_) => return Some((fail(this.error(FailureKind::Timeout, "no response within timeout")), Reading::Done)),
                    Ok(Err(e)) => return Some((fail(this.transport_error(&e)), Reading::Done)),
                    Ok(Ok(r)) => r,
                };
                if !resp.status().is_success() {
                    return Some((fail(this.status_error(resp).await), Reading::Done));
                }
                Reading::Body {
                    bytes: resp.bytes_stream().boxed(),
                    decoder: SseDecoder::new(),
                    pending: VecDeque::new(),
                    messages,
                    text: String::new(),
                    usage: None,
                    finished: false,
                    eof: false,
                }
            }
            Reading::Body { mut bytes, mut decoder, mut pending, messages, mut text, mut usage, mut finished, mut eof } => {
                if let Some(ev) = pending.pop_front() {
                    let next = if ev.is_terminal() {
                        Reading::Done
                    } else {
                        Reading::Body { bytes, decoder, pending, messages, text, usage, finished, eof }
                    };
                    return Some((ev, next));
                }
                if eof {
                    // no [DONE] sentinel; a finish_reason is enough to trust the text
                    let ev = if finished {
                        let usage = usage.unwrap_or_else(|| Usage::approximate(&messages, &text));
                        StreamEvent::Final { text, usage }
                    } else {
                        fail(this.error(FailureKind::Connection, "stream ended before completion"))
                    };
                    return Some((ev, Reading::Done));
                }
                let events = match tokio::time::timeout(this.timeout, bytes.next()).await {
                    Err(_) => return Some((fail(this.error(FailureKind::Timeout, "stream stalled")), Reading::Done)),
                    Ok(Some(Err(e))) => return Some((fail(this.transport_error(&e)), Reading::Done)),
                    Ok(Some(Ok(chunk))) => match decoder.push(&chunk) {
                        Ok(evs) => evs,
                        Err(e) => return Some((fail(this.error(FailureKind::Protocol, e.to_string())), Reading::Done)),
                    },
                    Ok(None) => {
                        eof = true;
                        decoder.finish().into_iter().collect()
                    }
                };
                for ev in events {
                    if ev.event.as_deref() == Some("error") {
                        pending.push_back(fail(this.error(FailureKind::Server, ev.data)));
                        break;
                    }
                    match parse_chunk(&ev.data) {
                        Ok(Chunk::Done) => {
                            let usage = usage.unwrap_or_else(|| Usage::approximate(&messages, &text));
                            pending.push_back(StreamEvent::Final { text: text.clone(), usage });
                            break;
                        }
                        Ok(Chunk::Delta { content, finished: f, usage: u }) => {
                            finished |= f;
                            if u.is_some() {
                                usage = u;
                            }
                            if !content.is_empty() {
                                text.push_str(&content);
                                pending.push_back(StreamEvent::Delta(content));
                            }
                        }
                        Err(ChunkError::Backend(m)) => {
                            pending.push_back(fail(this.error(FailureKind::Server, m)));
                            break;
                        }
                        Err(e @ ChunkError::Malformed(_)) => {
                            pending.push_back(fail(this.error(FailureKind::Protocol, e.to_string())));
                            break;
                        }
                    }
                }
                Reading::Body { bytes, decoder, pending, messages, text, usage, finished, eof }
            }
        };
    }
}

fn fail(e: GatewayError) -> StreamEvent {
    StreamEvent::Failure(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_append_v1_once() {
        let u = |s: &str| Url::parse(s).unwrap();
        assert_eq!(endpoint(&u("http://localhost:11434"), "models").unwrap().as_str(), "http://localhost:11434/v1/models");
        assert_eq!(
            endpoint(&u("https://api.example.com/v1/"), "chat/completions").unwrap().as_str(),
            "https://api.example.com/v1/chat/completions"
        );
        assert_eq!(endpoint(&u("http://h/proxy"), "models").unwrap().as_str(), "http://h/proxy/v1/models");
    }

    #[test]
    fn status_taxonomy() {
        assert_eq!(status_kind(StatusCode::UNAUTHORIZED), FailureKind::Auth);
        assert_eq!(status_kind(StatusCode::BAD_REQUEST), FailureKind::MalformedRequest);
        assert_eq!(status_kind(StatusCode::BAD_GATEWAY), FailureKind::Server);
        assert_eq!(status_kind(StatusCode::TOO_MANY_REQUESTS), FailureKind::Server);
    }
}
