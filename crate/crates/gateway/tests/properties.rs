use futures::executor::block_on;
use futures::StreamExt;
use proptest::prelude::*;
use tutorflow_gateway::sse::{encode_event, SseDecoder, SseEvent};
use tutorflow_gateway::{
    select_backend, BackendConfig, ChatMessage, CompletionStream, Fault, FailureKind, GatewayError, MockScript,
    ScriptEntry, StreamEvent, Usage,
};

fn raw_event() -> impl Strategy<Value = StreamEvent> {
    prop_oneof![
        4 => "[a-z ]{0,6}".prop_map(StreamEvent::Delta),
        1 => "[a-z ]{0,6}".prop_map(|text| StreamEvent::Final { text, usage: Usage::default() }),
        1 => Just(StreamEvent::Failure(GatewayError::new(FailureKind::Server, "boom"))),
    ]
}

fn kind() -> impl Strategy<Value = FailureKind> {
    prop::sample::select(vec![
        FailureKind::Timeout,
        FailureKind::Server,
        FailureKind::Connection,
        FailureKind::Auth,
        FailureKind::MalformedRequest,
        FailureKind::Protocol,
    ])
}

proptest! {
    /// Any raw backend schedule, including duplicated, missing or
    /// inconsistent terminals, comes out with exactly one terminal event.
    #[test]
    fn exactly_one_terminal(raw in prop::collection::vec(raw_event(), 0..12)) {
        let out: Vec<StreamEvent> = block_on(CompletionStream::from_events(raw).collect());
        prop_assert_eq!(out.iter().filter(|e| e.is_terminal()).count(), 1);
        prop_assert!(out.last().unwrap().is_terminal());
        let concat: String = out.iter().filter_map(|e| match e { StreamEvent::Delta(d) => Some(d.as_str()), _ => None }).collect();
        if let StreamEvent::Final { text, .. } = out.last().unwrap() {
            prop_assert_eq!(text, &concat);
        }
    }

    /// Scripted mock replies with injected faults keep the contract.
    #[test]
    fn injected_faults(reply in ".{0,30}", after in 0usize..4, k in kind(), user in "[a-z]{1,8}") {
        let script = MockScript { entries: vec![ScriptEntry { pattern: user.clone(), reply, fault: Some(Fault { after_deltas: after, kind: k }) }] };
        let gw = select_backend(BackendConfig::mock().with_script(script)).unwrap();
        let out: Vec<StreamEvent> = block_on(gw.complete(vec![ChatMessage::system("s"), ChatMessage::user(user)], Default::default()).collect());
        prop_assert_eq!(out.iter().filter(|e| e.is_terminal()).count(), 1);
        match out.last().unwrap() {
            StreamEvent::Failure(e) => prop_assert_eq!(e.kind, k),
            other => prop_assert!(false, "expected failure, got {:?}", other),
        }
    }

    /// Decoding does not depend on how the bytes are split into reads.
    #[test]
    fn decoder_ignores_read_boundaries(
        events in prop::collection::vec((prop::option::of("[a-z]{1,5}"), "[a-zA-Z0-9 {}\":,\n]{0,20}"), 0..6),
        cuts in prop::collection::vec(any::<prop::sample::Index>(), 0..8),
        crlf in any::<bool>(),
    ) {
        let mut wire: String = events.iter().map(|(e, d)| encode_event(e.as_deref(), d)).collect();
        if crlf {
            wire = wire.replace('\n', "\r\n");
        }
        let bytes = wire.as_bytes();
        let mut points: Vec<usize> = cuts.iter().map(|c| c.index(bytes.len() + 1)).collect();
        points.push(0);
        points.push(bytes.len());
        points.sort_unstable();
        let mut d = SseDecoder::new();
        let mut got: Vec<SseEvent> = Vec::new();
        for w in points.windows(2) {
            got.extend(d.push(&bytes[w[0]..w[1]]).unwrap());
        }
        got.extend(d.finish());
        let want: Vec<(Option<String>, String)> = events.into_iter().collect();
        let got: Vec<(Option<String>, String)> = got.into_iter().map(|e| (e.event, e.data)).collect();
        prop_assert_eq!(got, want);
    }
}

#[test]
fn thousand_mock_streams_are_whole_and_deterministic() {
    let script = MockScript::from_json(r#"[{"match":"quiz","reply":"Q: What stores blocks?\nA: DataNodes"}]"#).unwrap();
    let gw = select_backend(BackendConfig::mock().with_script(script)).unwrap();
    for i in 0..1000 {
        let user = if i % 3 == 0 { format!("quiz {i}") } else { format!("message {i} ü") };
        let convo = vec![ChatMessage::system("sys"), ChatMessage::user(user)];
        let a: Vec<StreamEvent> = block_on(gw.complete(convo.clone(), Default::default()).collect());
        let b: Vec<StreamEvent> = block_on(gw.complete(convo, Default::default()).collect());
        assert_eq!(a, b, "stream {i} not deterministic");
        let deltas: String = a.iter().filter_map(|e| match e { StreamEvent::Delta(d) => Some(d.as_str()), _ => None }).collect();
        match a.last().unwrap() {
            StreamEvent::Final { text, .. } => assert_eq!(text, &deltas),
            other => panic!("stream {i}: {other:?}"),
        }
        assert!(a.len() <= 3);
    }
}

#[test]
fn script_file_replays_in_order() {
    let dir = std::env::temp_dir().join(format!("gw-script-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("script.json");
    std::fs::write(&path, r#"[{"match":"lesson","reply":"Lesson one."},{"match":"attempt","reply":"VERDICT: correct"}]"#).unwrap();
    let cfg = BackendConfig::from_lookup(|k| match k {
        "LLM_MODE" => Some("mock".into()),
        "LLM_MOCK_SCRIPT" => Some(path.display().to_string()),
        _ => None,
    })
    .unwrap();
    let gw = select_backend(cfg).unwrap();
    let reply = |u: &str| block_on(gw.complete(vec![ChatMessage::system("s"), ChatMessage::user(u)], Default::default()).collect_all()).1.unwrap().0;
    assert_eq!(reply("Start the lesson"), "Lesson one.");
    assert_eq!(reply("Here is my attempt"), "VERDICT: correct");
    assert_eq!(reply("ping"), "mock:ping");
    std::fs::remove_dir_all(dir).ok();
}
