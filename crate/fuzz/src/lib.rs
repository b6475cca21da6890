//! Fuzz target bodies. Each takes raw bytes so the libFuzzer binaries and the
//! corpus replay test drive exactly the same code.

use tutorflow_core::access::{verify_token, PermissionMatrix, TokenKey};
use tutorflow_core::analytics::{EngagementEvent, EventLog};
use tutorflow_core::model::{validate_support_request, SupportDraft};
use tutorflow_core::prompt::{Template, TemplateCatalog};
use tutorflow_core::tutor::{extract_concepts, parse_generated_questions, parse_verdict};
use tutorflow_gateway::sse::{parse_chunk, SseDecoder, SseEvent};
use tutorflow_gateway::MockScript;

pub const TARGETS: &[(&str, fn(&[u8]))] = &[
    ("template_parse", template_parse),
    ("template_catalog", template_catalog),
    ("token_verify", token_verify),
    ("permission_matrix", permission_matrix),
    ("quiz_reply", quiz_reply),
    ("concepts", concepts),
    ("event_log", event_log),
    ("sse_decoder", sse_decoder),
    ("stream_chunk", stream_chunk),
    ("engagement_event", engagement_event),
    ("mock_script", mock_script),
    ("support_draft", support_draft),
];

fn text(data: &[u8]) -> Option<&str> {
    std::str::from_utf8(data).ok()
}

pub fn template_parse(data: &[u8]) {
    if let Some(s) = text(data) {
        let _ = Template::parse(s);
    }
}

pub fn template_catalog(data: &[u8]) {
    if let Some(s) = text(data) {
        let _ = TemplateCatalog::from_json(s);
    }
}

/// First 8 bytes are the clock, the rest is the bearer string.
pub fn token_verify(data: &[u8]) {
    let (clock, token) = data.split_at(data.len().min(8));
    let mut now = [0u8; 8];
    now[..clock.len()].copy_from_slice(clock);
    if let Some(t) = text(token) {
        // nothing the fuzzer builds should carry a valid signature
        assert!(verify_token(&TokenKey::new("fuzz-secret"), t, i64::from_le_bytes(now)).is_err());
    }
}

pub fn permission_matrix(data: &[u8]) {
    if let Some(m) = text(data).and_then(|s| PermissionMatrix::from_json(s).ok()) {
        let again = PermissionMatrix::from_json(&m.to_json()).expect("own output parses");
        assert_eq!(m, again);
    }
}

pub fn quiz_reply(data: &[u8]) {
    let Some(reply) = text(data) else { return };
    if let Ok(qs) = parse_generated_questions(reply) {
        assert!(qs.iter().all(|q| q.question_text.trim() == q.question_text && q.expected_answer_key.trim() == q.expected_answer_key));
    }
    let _ = parse_verdict(reply);
}

pub fn concepts(data: &[u8]) {
    if let Some(s) = text(data) {
        for c in extract_concepts(s) {
            assert!(!c.trim().is_empty());
        }
    }
}

pub fn event_log(data: &[u8]) {
    if let Some(s) = text(data) {
        let (log, corrupt) = EventLog::replay_jsonl(s);
        assert!(log.len() + corrupt.len() <= s.lines().count());
    }
}

fn decode(parts: &[&[u8]]) -> Option<Vec<SseEvent>> {
    let mut d = SseDecoder::new();
    let mut out = Vec::new();
    for p in parts {
        out.extend(d.push(p).ok()?);
    }
    out.extend(d.finish());
    Some(out)
}

/// First 2 bytes pick a split point in the remaining stream.
pub fn sse_decoder(data: &[u8]) {
    if data.len() < 2 {
        return;
    }
    let (head, bytes) = data.split_at(2);
    let at = usize::from(u16::from_le_bytes([head[0], head[1]])) % (bytes.len() + 1);
    // where the network splits the stream must not change what is decoded
    if let (Some(a), Some(b)) = (decode(&[bytes]), decode(&[&bytes[..at], &bytes[at..]])) {
        assert_eq!(a, b);
    }
}

pub fn stream_chunk(data: &[u8]) {
    if let Some(s) = text(data) {
        let _ = parse_chunk(s);
    }
}

pub fn engagement_event(data: &[u8]) {
    if let Ok(e) = serde_json::from_slice::<EngagementEvent>(data) {
        let back: EngagementEvent = serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
        assert_eq!(e, back);
    }
}

pub fn mock_script(data: &[u8]) {
    if let Some(s) = text(data) {
        let _ = MockScript::from_json(s);
    }
}

pub fn support_draft(data: &[u8]) {
    if let Ok(draft) = serde_json::from_slice::<SupportDraft>(data) {
        if let Ok(req) = validate_support_request(&draft) {
            assert!(!req.learning_objective.trim().is_empty());
        }
    }
}
