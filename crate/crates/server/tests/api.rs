mod common;

use common::*;
use reqwest::StatusCode;
use serde_json::json;
use tutorflow_core::access::Role;
use tutorflow_gateway::{FailureKind, Fault, MockScript, ScriptEntry};

async fn learner_setup() -> (Harness, String) {
    let h = start(Options { gateway: Some(mock(journey_script())), ..Options::default() }).await;
    seed_user(&h.app, "L1", Role::Learner);
    let token = h.login("l1").await;
    (h, token)
}

#[tokio::test(flavor = "multi_thread")]
async fn login_outcomes() {
    let h = start(Options::default()).await;
    seed_user(&h.app, "L1", Role::Learner);
    let (status, body) = h
        .send(reqwest::Method::POST, "/api/auth/login", None, Some(json!({"username": "l1", "password": PASSWORD})))
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["role"], "Learner");
    assert_eq!(body["schema_version"], 1);
    assert!(body["permissions"].as_array().unwrap().contains(&json!("chat_with_tutor")));

    let (status, _) = h
        .send(reqwest::Method::POST, "/api/auth/login", None, Some(json!({"username": "l1", "password": "wrong"})))
        .await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, _) = h
        .send(reqwest::Method::POST, "/api/auth/login", None, Some(json!({"username": "nobody", "password": PASSWORD})))
        .await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);

    let token = h.login("l1").await;
    h.app.accounts.update("L1", T0, |a| tutorflow_server::state::Account { disabled: true, ..a.unwrap() }).unwrap();
    let (status, body) = h
        .send(reqwest::Method::POST, "/api/auth/login", None, Some(json!({"username": "l1", "password": PASSWORD})))
        .await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::FORBIDDEN, Some("account_disabled")));
    // tokens issued before the account was disabled stop working too
    assert_eq!(h.get(&token, "/api/auth/me").await.0, StatusCode::FORBIDDEN);
}

#[tokio::test(flavor = "multi_thread")]
async fn missing_or_garbage_tokens_are_401() {
    let h = start(Options::default()).await;
    let (status, body) = h.send(reqwest::Method::GET, "/api/auth/me", None, None).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNAUTHORIZED, Some("missing_token")));
    let (status, _) = h.get("garbage", "/api/auth/me").await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
}

#[tokio::test(flavor = "multi_thread")]
async fn permissions_and_personas_for_the_client() {
    let (h, token) = learner_setup().await;
    let (status, body) = h.get(&token, "/api/permissions").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["role"], "Learner");
    assert_eq!(body["matrix"]["Parent"], json!(["view_child_summary"]));
    let (_, body) = h.send(reqwest::Method::GET, "/api/personas", None, None).await;
    assert_eq!(body["personas"].as_array().unwrap().len(), 5);
}

#[tokio::test(flavor = "multi_thread")]
async fn support_creation_validates_and_plans() {
    let (h, token) = learner_setup().await;
    let (status, body) = h.post(&token, "/api/supports", draft("L1", "Hadoop: HDFS, MapReduce and YARN")).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(body["phase"], "PlanProposed");
    assert_eq!(body["plan"]["status"], "AwaitingApproval");
    let titles: Vec<&str> = body["plan"]["sessions"].as_array().unwrap().iter().map(|s| s["concept_title"].as_str().unwrap()).collect();
    assert_eq!(titles, ["Introduction to Hadoop", "HDFS", "MapReduce", "YARN"]);

    let mut bad = draft("L1", "");
    bad["goal_type"] = json!("Whatever");
    let (status, body) = h.post(&token, "/api/supports", bad).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let fields: Vec<&str> = body["fields"].as_array().unwrap().iter().map(|f| f["field"].as_str().unwrap()).collect();
    assert_eq!(fields, ["learning_objective", "goal_type"]);
    assert_eq!(body["fields"][0]["error"]["error"], "MissingMandatoryField");

    let sid = body_support(&h, &token).await;
    let mut dup = draft("L1", "Again");
    dup["support_id"] = json!(sid);
    assert_eq!(h.post(&token, "/api/supports", dup).await.0, StatusCode::CONFLICT);

    // somebody else's support
    assert_eq!(h.post(&token, "/api/supports", draft("L2", "x")).await.0, StatusCode::FORBIDDEN);
}

async fn body_support(h: &Harness, token: &str) -> String {
    h.onboard(token, "L1", "Graphs").await.0
}

#[tokio::test(flavor = "multi_thread")]
async fn teacher_cannot_create_learner_support() {
    let (h, _) = learner_setup().await;
    seed_user(&h.app, "T1", Role::Teacher);
    let t = h.login("t1").await;
    let (status, body) = h.post(&t, "/api/supports", draft("L1", "HDFS")).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::FORBIDDEN, Some("forbidden")));
    assert!(h.app.supports.is_empty());
}

#[tokio::test(flavor = "multi_thread")]
async fn uploads_index_replan_and_enforce_limits() {
    let h = start(Options { upload_cap: Some(10 * 1024), ..Options::default() }).await;
    seed_user(&h.app, "L1", Role::Learner);
    let token = h.login("l1").await;
    let (support, session) = h.onboard(&token, "L1", "Big data").await;

    let (status, body) = h.upload(&token, &support, "syllabus.md", tutorflow_testkit::SYLLABUS.as_bytes().to_vec()).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(body["replanned"], true);
    let (_, view) = h.get(&token, &format!("/api/sessions/{session}")).await;
    let titles: Vec<&str> = view["lessons"].as_array().unwrap().iter().map(|l| l["title"].as_str().unwrap()).collect();
    assert_eq!(titles, ["Introduction", "HDFS", "MapReduce", "YARN"]);
    let doc = body["doc_id"].as_str().unwrap();
    assert!(h.dir.path().join(format!("documents/{doc}.raw")).exists());
    let hits = h.app.corpus.read().unwrap().retrieve("replicated racks", 3, Some(&support.as_str().into()));
    assert_eq!(hits[0].doc_id.as_str(), doc);

    // 10 KB of text is at the cap and accepted
    let text = "word ".repeat(2048);
    assert_eq!(h.upload(&token, &support, "notes.txt", text.into_bytes()).await.0, StatusCode::CREATED);
    assert_eq!(h.upload(&token, &support, "big.txt", vec![b'a'; 10 * 1024 + 1]).await.0, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(h.upload(&token, &support, "x.bin", vec![0, 159, 146, 150, 0, 1]).await.0, StatusCode::UNSUPPORTED_MEDIA_TYPE);
    assert_eq!(h.upload(&token, &support, "empty.txt", b"   ".to_vec()).await.0, StatusCode::UNPROCESSABLE_ENTITY);

    let uploads = h.app.events.snapshot().into_iter().filter(|e| matches!(e.kind, tutorflow_core::analytics::EngagementKind::MaterialUploaded { .. })).count();
    assert_eq!(uploads, 2);
}

#[tokio::test(flavor = "multi_thread")]
async fn session_event_outcomes() {
    let (h, token) = learner_setup().await;
    let (_, session) = h.onboard(&token, "L1", "Hadoop: HDFS, YARN").await;
    let (status, body) = h.event(&token, &session, json!({"type": "ApprovePlan", "schema_version": 1})).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["phase"], "PlanApproved");
    assert_eq!(body["plan_status"], "Approved");
    assert_eq!(body["legal_events"], json!(["RequestDelivery"]));

    let (status, body) = h.event(&token, &session, json!({"type": "RequestDelivery"})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["phase"], "PracticeAwaitingInput");
    assert!(body["messages"][0].as_str().unwrap().contains("Practice task"));

    let (status, body) = h.event(&token, &session, json!({"type": "ChooseQuiz"})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "invalid_transition");
    assert_eq!(body["phase"], "PracticeAwaitingInput");

    let (status, _) = h.event(&token, "nope", json!({"type": "ApprovePlan"})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = h.event(&token, &session, json!({"type": "Dance"})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (_, t) = h.get(&token, &format!("/api/sessions/{session}/transcript")).await;
    assert_eq!(t["lines"].as_array().unwrap().len(), 1);
}

#[tokio::test(flavor = "multi_thread")]
async fn reject_plan_keeps_phase_and_marks_plan() {
    let (h, token) = learner_setup().await;
    let (support, session) = h.onboard(&token, "L1", "Hadoop: HDFS, YARN").await;
    let (status, body) = h.event(&token, &session, json!({"type": "RejectPlan"})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["phase"], "PlanProposed");
    let plan_id = h.app.supports.get(&support).unwrap().plan_id;
    assert_eq!(h.app.plans.get(plan_id.as_str()).unwrap().status, tutorflow_core::tutor::PlanStatus::Rejected);
}

#[tokio::test(flavor = "multi_thread")]
async fn backend_failure_is_502_and_state_is_kept() {
    let script = MockScript {
        entries: vec![ScriptEntry {
            pattern: "Start the lesson".into(),
            reply: "never finished".into(),
            fault: Some(Fault { after_deltas: 1, kind: FailureKind::Server }),
        }],
    };
    let h = start(Options { gateway: Some(mock(script)), ..Options::default() }).await;
    seed_user(&h.app, "L1", Role::Learner);
    let token = h.login("l1").await;
    let (_, session) = h.onboard(&token, "L1", "Hadoop: HDFS").await;
    h.event(&token, &session, json!({"type": "ApprovePlan"})).await;
    let before = h.app.sessions.get(&session).unwrap();
    let (status, body) = h.event(&token, &session, json!({"type": "RequestDelivery"})).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::BAD_GATEWAY, Some("llm_failure")));
    assert_eq!(h.app.sessions.get(&session).unwrap(), before);
}

#[tokio::test(flavor = "multi_thread")]
async fn chat_streams_and_persists() {
    let (h, token) = learner_setup().await;
    let (_, session) = h.onboard(&token, "L1", "Hadoop: HDFS").await;

    let (status, body) = h.chat_raw(&token, &session, "ping").await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");

    h.event(&token, &session, json!({"type": "ApprovePlan"})).await;
    h.event(&token, &session, json!({"type": "RequestDelivery"})).await;
    let frames = h.chat(&token, &session, "ping").await;
    let (deltas, last) = split_frames(&frames);
    assert_eq!(last.event.as_deref(), Some("done"));
    assert_eq!(deltas, "mock:ping");
    assert_eq!(last.data["text"], "mock:ping");
    assert_eq!(frames.len(), 3);

    let (_, t) = h.get(&token, &format!("/api/sessions/{session}/transcript")).await;
    let lines = t["lines"].as_array().unwrap();
    assert_eq!(lines[lines.len() - 2]["text"], "ping");
    assert_eq!(lines[lines.len() - 1]["text"], "mock:ping");
    assert_eq!(lines[lines.len() - 1]["role"], "tutor");
}

#[tokio::test(flavor = "multi_thread")]
async fn chat_failure_is_an_error_event() {
    let script = MockScript {
        entries: vec![ScriptEntry {
            pattern: "flaky".into(),
            reply: "partial answer here".into(),
            fault: Some(Fault { after_deltas: 1, kind: FailureKind::Timeout }),
        }],
    };
    let h = start(Options { gateway: Some(mock(script)), ..Options::default() }).await;
    seed_user(&h.app, "L1", Role::Learner);
    let token = h.login("l1").await;
    let (_, session) = h.onboard(&token, "L1", "Hadoop: HDFS").await;
    h.event(&token, &session, json!({"type": "ApprovePlan"})).await;
    h.event(&token, &session, json!({"type": "RequestDelivery"})).await;
    let lines_before = h.app.transcripts.get(&session).unwrap().len();
    let frames = h.chat(&token, &session, "flaky question").await;
    let last = frames.last().unwrap();
    assert_eq!(last.event.as_deref(), Some("error"));
    assert_eq!(last.data["kind"], "timeout");
    assert_eq!(last.data["retryable"], true);
    assert_eq!(frames.iter().filter(|f| f.event.is_none()).count(), 1);
    assert_eq!(h.app.transcripts.get(&session).unwrap().len(), lines_before);
}

#[tokio::test(flavor = "multi_thread")]
async fn dashboard_views_by_role() {
    let (h, token) = learner_setup().await;
    seed_user(&h.app, "P1", Role::Parent);
    seed_user(&h.app, "P2", Role::Parent);
    seed_user(&h.app, "T1", Role::Teacher);
    link(&h.app, "P1", "L1");
    let (support, session) = h.onboard(&token, "L1", "Hadoop: HDFS").await;
    let events = json!({"events": [
        {"event_id": "w1", "learner_id": "L1", "kind": {"type": "StepEntered", "step": 1}, "at": 1000},
        {"event_id": "w2", "learner_id": "L1", "kind": {"type": "StepExited", "step": 1}, "at": 61000},
        {"event_id": "w1", "learner_id": "L1", "kind": {"type": "StepEntered", "step": 1}, "at": 1000},
    ]});
    let (status, body) = h.post(&token, "/api/learners/L1/events", events).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!((body["accepted"].as_u64(), body["duplicates"].as_u64()), (Some(2), Some(1)));
    h.event(&token, &session, json!({"type": "ApprovePlan"})).await;
    h.event(&token, &session, json!({"type": "RequestDelivery"})).await;
    h.chat(&token, &session, "secret question").await;

    let (status, own) = h.get(&token, "/api/learners/L1/dashboard").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(own["view"], "full");
    assert_eq!(own["summary"]["step_durations"]["1"], 60000);
    assert!(own["summary"]["recent_messages"].to_string().contains("secret question"));

    let p = h.login("p1").await;
    let (status, parent) = h.get(&p, "/api/learners/L1/dashboard").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(parent["view"], "parent");
    assert!(!parent.to_string().contains("secret question"));
    assert!(parent["summary"].get("recent_messages").is_none());
    assert_eq!(parent["summary"]["sessions_total"], own["summary"]["sessions_total"]);

    let p2 = h.login("p2").await;
    let (status, body) = h.get(&p2, "/api/learners/L1/dashboard").await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::FORBIDDEN, Some("not_linked")));

    let t = h.login("t1").await;
    assert_eq!(h.get(&t, "/api/learners/L1/dashboard").await.1["view"], "full");
    assert_eq!(h.get(&t, "/api/learners/nobody/dashboard").await.0, StatusCode::NOT_FOUND);

    let (_, window) = h.get(&token, "/api/learners/L1/dashboard?from=100000&to=200000").await;
    assert_eq!(window["summary"]["engagement"]["total"], 0.0);

    let (status, path) = h.get(&token, "/api/learners/L1/path").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(path["support_id"], support.as_str());
    assert_eq!(path["path"][0]["status"], "InProgress");
}

#[tokio::test(flavor = "multi_thread")]
async fn admin_endpoints() {
    let h = start(Options::default()).await;
    seed_user(&h.app, "A1", Role::Administrator);
    let a = h.login("a1").await;
    let (status, body) = h
        .post(&a, "/api/admin/users", json!({"username": "kid", "password": "longenough", "role": "Learner", "user_id": "K1"}))
        .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let (status, _) = h.post(&a, "/api/admin/users", json!({"username": "kid", "password": "longenough", "role": "Learner"})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = h.post(&a, "/api/admin/users", json!({"username": "mum", "password": "short", "role": "Parent"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    h.post(&a, "/api/admin/users", json!({"username": "mum", "password": "longenough", "role": "Parent", "user_id": "M1"})).await;

    let (status, body) = h.post(&a, "/api/admin/links", json!({"parent": "M1", "child": "K1"})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["children"], json!(["K1"]));
    assert_eq!(h.post(&a, "/api/admin/links", json!({"parent": "K1", "child": "M1"})).await.0, StatusCode::BAD_REQUEST);

    let (status, body) = h.get(&a, "/api/admin/llm/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["health"]["status"], "healthy");
    assert_eq!(body["mode"], "mock");

    let kid = h.login_with("kid", "longenough").await;
    let (status, _) = h.post(&a, "/api/admin/users/K1/disable", json!({})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(h.get(&kid, "/api/auth/me").await.0, StatusCode::FORBIDDEN);
    assert_eq!(h.post(&a, "/api/admin/users/ghost/disable", json!({})).await.0, StatusCode::NOT_FOUND);
    assert_eq!(h.post(&kid, "/api/admin/users", json!({})).await.0, StatusCode::FORBIDDEN);
}

#[tokio::test(flavor = "multi_thread")]
async fn curated_content_is_visible_to_every_support() {
    let (h, token) = learner_setup().await;
    seed_user(&h.app, "T1", Role::Teacher);
    let t = h.login("t1").await;
    let (status, body) = h
        .post(&t, "/api/content/documents", json!({"doc_id": "hdfs-guide", "text": "Erasure coding trades storage for reconstruction cost."}))
        .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(h.post(&token, "/api/content/documents", json!({"text": "x"})).await.0, StatusCode::FORBIDDEN);
    let hits = h.app.corpus.read().unwrap().retrieve("erasure coding", 1, None);
    assert_eq!(hits[0].doc_id.as_str(), "hdfs-guide");
}

#[tokio::test(flavor = "multi_thread")]
async fn state_survives_reopen() {
    let (h, token) = learner_setup().await;
    let (support, session) = h.onboard(&token, "L1", "Hadoop: HDFS").await;
    h.upload(&token, &support, "notes.md", b"# Blocks\nBlocks are replicated.\n# Racks\nRack awareness.".to_vec()).await;
    h.event(&token, &session, json!({"type": "ApprovePlan"})).await;
    let snapshot = (h.app.sessions.get(&session), h.app.supports.get(&support), h.app.events.len());
    let dir = h.dir;
    let h2 = start_in(dir, Options::default()).await;
    assert_eq!((h2.app.sessions.get(&session), h2.app.supports.get(&support), h2.app.events.len()), snapshot);
    assert!(h2.app.report.corrupt_records.is_empty());
    let hits = h2.app.corpus.read().unwrap().retrieve("rack awareness", 1, Some(&support.as_str().into()));
    assert_eq!(hits.len(), 1);
    let token = h2.login("l1").await;
    assert_eq!(h2.get(&token, &format!("/api/sessions/{session}")).await.1["phase"], "PlanApproved");
}
