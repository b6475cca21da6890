//! Incremental server-sent events decoding and the chat-completions chunk
//! format carried inside `data:` fields.

use serde::Deserialize;

use crate::Usage;

/// One dispatched event.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SseEvent {
    /// `None` when the event had no `event:` field ("message").
    pub event: Option<String>,
    pub data: String,
    pub id: Option<String>,
}

/// Buffers bytes until a blank line ends an event. Handles `\n`, `\r\n`
/// and bare `\r` line endings, comments and multi-line `data:` fields.
#[derive(Debug, Default)]
pub struct SseDecoder {
    buf: Vec<u8>,
    event: Option<String>,
    data: Vec<String>,
    id: Option<String>,
    saw_field: bool,
}

/// Cap on a single line so a backend that never sends a newline cannot
/// grow the buffer without bound.
pub const MAX_LINE_BYTES: usize = 4 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("sse line longer than {MAX_LINE_BYTES} bytes")]
pub struct LineTooLong;

impl SseDecoder {
    pub fn new() -> Self {
        SseDecoder::default()
    }

    pub fn push(&mut self, bytes: &[u8]) -> Result<Vec<SseEvent>, LineTooLong> {
        self.buf.extend_from_slice(bytes);
        let mut out = Vec::new();
        while let Some(end) = self.buf.iter().position(|b| *b == b'\n' || *b == b'\r') {
            // a lone trailing \r may be the first half of \r\n
            if self.buf[end] == b'\r' && end + 1 == self.buf.len() {
                break;
            }
            let skip = if self.buf[end] == b'\r' && self.buf.get(end + 1) == Some(&b'\n') { 2 } else { 1 };
            let line: Vec<u8> = self.buf.drain(..end + skip).take(end).collect();
            if let Some(ev) = self.line(&String::from_utf8_lossy(&line)) {
                out.push(ev);
            }
        }
        if self.buf.len() > MAX_LINE_BYTES {
            self.buf.clear();
            return Err(LineTooLong);
        }
        Ok(out)
    }

    /// Flushes an event left open when the stream closed without a blank line.
    pub fn finish(&mut self) -> Option<SseEvent> {
        if !self.buf.is_empty() {
            let rest = String::from_utf8_lossy(&std::mem::take(&mut self.buf)).into_owned();
            let rest = rest.trim_end_matches('\r').to_owned();
            self.line(&rest);
        }
        self.dispatch()
    }

    fn line(&mut self, line: &str) -> Option<SseEvent> {
        if line.is_empty() {
            return self.dispatch();
        }
        if line.starts_with(':') {
            return None;
        }
        let (field, value) = match line.split_once(':') {
            Some((f, v)) => (f, v.strip_prefix(' ').unwrap_or(v)),
            None => (line, ""),
        };
        match field {
            "data" => {
                self.data.push(value.to_owned());
                self.saw_field = true;
            }
            "event" => {
                self.event = Some(value.to_owned());
                self.saw_field = true;
            }
            "id" => self.id = Some(value.to_owned()),
            _ => {}
        }
        None
    }

    fn dispatch(&mut self) -> Option<SseEvent> {
        if !self.saw_field {
            self.event = None;
            return None;
        }
        self.saw_field = false;
        Some(SseEvent {
            event: self.event.take(),
            data: std::mem::take(&mut self.data).join("\n"),
            id: self.id.clone(),
        })
    }
}

/// Writes one event in wire form.
pub fn encode_event(event: Option<&str>, data: &str) -> String {
    let mut out = String::new();
    if let Some(e) = event {
        out.push_str("event: ");
        out.push_str(e);
        out.push('\n');
    }
    for line in data.split('\n') {
        out.push_str("data: ");
        out.push_str(line);
        out.push('\n');
    }
    out.push('\n');
    out
}

/// What a `data:` payload of a chat-completions stream means.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Chunk {
    Delta { content: String, finished: bool, usage: Option<Usage> },
    /// The `[DONE]` sentinel.
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChunkError {
    #[error("malformed chunk: {0}")]
    Malformed(String),
    #[error("backend reported an error: {0}")]
    Backend(String),
}

#[derive(Deserialize)]
struct RawChunk {
    #[serde(default)]
    choices: Vec<RawChoice>,
    #[serde(default)]
    usage: Option<RawUsage>,
    #[serde(default)]
    error: Option<serde_json::Value>,
}

#[derive(Deserialize)]
struct RawChoice {
    #[serde(default)]
    delta: Option<RawDelta>,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct RawDelta {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct RawUsage {
    #[serde(default)]
    prompt_tokens: u32,
    #[serde(default)]
    completion_tokens: u32,
}

pub fn parse_chunk(data: &str) -> Result<Chunk, ChunkError> {
    let data = data.trim();
    if data == "[DONE]" {
        return Ok(Chunk::Done);
    }
    let raw: RawChunk = serde_json::from_str(data).map_err(|e| ChunkError::Malformed(e.to_string()))?;
    if let Some(err) = raw.error {
        let msg = err
            .get("message")
            .and_then(|m| m.as_str())
            .map(str::to_owned)
            .unwrap_or_else(|| err.to_string());
        return Err(ChunkError::Backend(msg));
    }
    let mut content = String::new();
    let mut finished = false;
    for choice in raw.choices {
        if let Some(c) = choice.delta.and_then(|d| d.content) {
            content.push_str(&c);
        }
        finished |= choice.finish_reason.is_some();
    }
    let usage = raw.usage.map(|u| Usage {
        prompt_tokens: u.prompt_tokens,
        completion_tokens: u.completion_tokens,
        approximate: false,
    });
    Ok(Chunk::Delta { content, finished, usage })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decode_all(chunks: &[&[u8]]) -> Vec<SseEvent> {
        let mut d = SseDecoder::new();
        let mut out: Vec<SseEvent> = chunks.iter().flat_map(|c| d.push(c).unwrap()).collect();
        out.extend(d.finish());
        out
    }

    #[test]
    fn split_across_reads() {
        let evs = decode_all(&[b"data: hel", b"lo\n", b"\ndata: x\r", b"\n\r\n"]);
        assert_eq!(evs.iter().map(|e| e.data.as_str()).collect::<Vec<_>>(), ["hello", "x"]);
    }

    #[test]
    fn named_events_and_multiline_data() {
        let evs = decode_all(&[b": keepalive\nevent: done\ndata: a\ndata: b\n\n"]);
        assert_eq!(evs, [SseEvent { event: Some("done".into()), data: "a\nb".into(), id: None }]);
    }

    #[test]
    fn unterminated_event_is_flushed() {
        assert_eq!(decode_all(&[b"data: tail"])[0].data, "tail");
    }

    #[test]
    fn encode_then_decode() {
        let wire = encode_event(Some("error"), "line one\nline two");
        let evs = decode_all(&[wire.as_bytes()]);
        assert_eq!(evs[0].event.as_deref(), Some("error"));
        assert_eq!(evs[0].data, "line one\nline two");
    }

    #[test]
    fn chunk_forms() {
        assert_eq!(parse_chunk("[DONE]"), Ok(Chunk::Done));
        let c = parse_chunk(r#"{"choices":[{"delta":{"content":"Hi"},"finish_reason":null}]}"#).unwrap();
        assert_eq!(c, Chunk::Delta { content: "Hi".into(), finished: false, usage: None });
        let c = parse_chunk(r#"{"choices":[],"usage":{"prompt_tokens":3,"completion_tokens":2}}"#).unwrap();
        assert!(matches!(c, Chunk::Delta { usage: Some(Usage { prompt_tokens: 3, completion_tokens: 2, .. }), .. }));
        assert!(matches!(parse_chunk("{not json"), Err(ChunkError::Malformed(_))));
        assert!(matches!(parse_chunk(r#"{"error":{"message":"overloaded"}}"#), Err(ChunkError::Backend(m)) if m == "overloaded"));
    }
}
