#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use reqwest::StatusCode;
use serde_json::Value;
use tempfile::TempDir;
use tutorflow_core::access::Role;
use tutorflow_core::UserId;
use tutorflow_gateway::sse::SseDecoder;
use tutorflow_gateway::{select_backend, BackendConfig, Gateway, MockScript, ScriptEntry};
use tutorflow_server::auth::hash_password;
use tutorflow_server::state::{Account, Clock};
use tutorflow_server::{router, App, AppState, Hooks, IdSource, ServerConfig};

pub const T0: i64 = 1_700_000_000_000;
pub const PASSWORD: &str = "correct horse battery";

/// Advances one second per reading, so a sequential run is deterministic.
pub fn step_clock() -> Clock {
    let t = Arc::new(AtomicI64::new(T0));
    Arc::new(move || t.fetch_add(1_000, Ordering::SeqCst))
}

/// The journey script plus a scripted hint for chat turns.
pub fn journey_script() -> MockScript {
    let mut script = MockScript::from_json(tutorflow_testkit::JOURNEY_SCRIPT).unwrap();
    script.entries.push(ScriptEntry {
        pattern: "hint".into(),
        reply: "Think about what happens to a block when one rack loses power.".into(),
        fault: None,
    });
    script
}

pub fn mock(script: MockScript) -> Gateway {
    select_backend(BackendConfig::mock().with_script(script)).unwrap()
}

#[derive(Default)]
pub struct Options {
    pub gateway: Option<Gateway>,
    pub deterministic: bool,
    pub upload_cap: Option<usize>,
    pub matrix: Option<PathBuf>,
}

/// HTTP client bound to one server.
pub struct Api {
    pub base: String,
    pub http: reqwest::Client,
}

impl Api {
    pub fn new(base: impl Into<String>) -> Self {
        Api { base: base.into(), http: reqwest::Client::new() }
    }
}

pub struct Harness {
    pub app: AppState,
    pub api: Api,
    pub dir: TempDir,
}

impl std::ops::Deref for Harness {
    type Target = Api;

    fn deref(&self) -> &Api {
        &self.api
    }
}

pub async fn start(opts: Options) -> Harness {
    let dir = tempfile::tempdir().unwrap();
    start_in(dir, opts).await
}

pub async fn start_in(dir: TempDir, opts: Options) -> Harness {
    let mut config = ServerConfig::new(dir.path());
    config.token_secret = Some("test-secret".into());
    config.permission_matrix = opts.matrix;
    if let Some(cap) = opts.upload_cap {
        config.upload_cap_bytes = cap;
    }
    let mut hooks = Hooks { gateway: opts.gateway, ..Hooks::default() };
    if opts.deterministic {
        hooks.clock = step_clock();
        hooks.ids = IdSource::sequential();
    }
    let app = App::open(config, hooks).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let svc = router(app.clone());
    tokio::spawn(async move { axum::serve(listener, svc).await });
    Harness { app, api: Api::new(base), dir }
}

pub fn seed_user(app: &AppState, id: &str, role: Role) {
    let account = Account {
        user_id: UserId::new(id),
        username: id.to_lowercase(),
        display_name: id.to_owned(),
        password_hash: hash_password(PASSWORD),
        role,
        disabled: false,
        created_at: T0,
    };
    app.accounts.put(id, &account, T0).unwrap();
}

pub fn link(app: &AppState, parent: &str, child: &str) {
    app.update_links(|l| {
        l.link(UserId::new(parent), UserId::new(child));
    })
    .unwrap();
}

/// A support draft that validates.
pub fn draft(learner: &str, objective: &str) -> Value {
    serde_json::json!({
        "schema_version": 1,
        "learner_id": learner,
        "learning_objective": objective,
        "short_description": "I build data pipelines and want to understand the storage",
        "subject_area": "Distributed systems",
        "goal_type": "PrepareForExam",
        "start_date": "2026-01-05",
        "end_date": "2026-02-20",
        "education_level": "University",
        "content_language": "en",
        "estimated_duration_minutes": 30,
        "keywords": ["hdfs", "yarn"],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SseFrame {
    pub event: Option<String>,
    pub data: Value,
}

impl Api {
    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    pub async fn login(&self, username: &str) -> String {
        self.login_with(username, PASSWORD).await
    }

    pub async fn login_with(&self, username: &str, password: &str) -> String {
        let (status, body) = self
            .send(reqwest::Method::POST, "/api/auth/login", None, Some(serde_json::json!({"username": username, "password": password})))
            .await;
        assert_eq!(status, StatusCode::OK, "{body}");
        body["token"].as_str().unwrap().to_owned()
    }

    pub async fn send(&self, method: reqwest::Method, path: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
        let mut req = self.http.request(method, self.url(path));
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        if let Some(b) = body {
            req = req.json(&b);
        }
        let resp = req.send().await.unwrap();
        let status = resp.status();
        let text = resp.text().await.unwrap();
        (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
    }

    pub async fn get(&self, token: &str, path: &str) -> (StatusCode, Value) {
        self.send(reqwest::Method::GET, path, Some(token), None).await
    }

    pub async fn post(&self, token: &str, path: &str, body: Value) -> (StatusCode, Value) {
        self.send(reqwest::Method::POST, path, Some(token), Some(body)).await
    }

    pub async fn event(&self, token: &str, session: &str, event: Value) -> (StatusCode, Value) {
        self.post(token, &format!("/api/sessions/{session}/events"), event).await
    }

    pub async fn upload(&self, token: &str, support: &str, name: &str, bytes: Vec<u8>) -> (StatusCode, Value) {
        let part = reqwest::multipart::Part::bytes(bytes).file_name(name.to_owned());
        let form = reqwest::multipart::Form::new().part("file", part);
        let resp = self
            .http
            .post(self.url(&format!("/api/supports/{support}/materials")))
            .bearer_auth(token)
            .multipart(form)
            .send()
            .await
            .unwrap();
        let status = resp.status();
        let text = resp.text().await.unwrap();
        (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
    }

    /// Posts a chat message and returns the status plus the raw SSE body.
    pub async fn chat_raw(&self, token: &str, session: &str, message: &str) -> (StatusCode, String) {
        let resp = self
            .http
            .post(self.url(&format!("/api/sessions/{session}/chat")))
            .bearer_auth(token)
            .json(&serde_json::json!({"schema_version": 1, "message": message}))
            .send()
            .await
            .unwrap();
        (resp.status(), resp.text().await.unwrap())
    }

    pub async fn chat(&self, token: &str, session: &str, message: &str) -> Vec<SseFrame> {
        let (status, body) = self.chat_raw(token, session, message).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        parse_sse(&body)
    }

    /// Creates a support for `learner` and returns (support_id, session_id).
    pub async fn onboard(&self, token: &str, learner: &str, objective: &str) -> (String, String) {
        let (status, body) = self.post(token, "/api/supports", draft(learner, objective)).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        (body["support_id"].as_str().unwrap().to_owned(), body["session_id"].as_str().unwrap().to_owned())
    }
}

pub fn parse_sse(body: &str) -> Vec<SseFrame> {
    let mut d = SseDecoder::new();
    let mut events = d.push(body.as_bytes()).unwrap();
    events.extend(d.finish());
    events
        .into_iter()
        .map(|e| SseFrame { event: e.event, data: serde_json::from_str(&e.data).unwrap() })
        .collect()
}

/// Concatenated deltas and the terminal frame.
pub fn split_frames(frames: &[SseFrame]) -> (String, &SseFrame) {
    let deltas: String = frames
        .iter()
        .filter(|f| f.event.is_none())
        .map(|f| f.data["delta"].as_str().unwrap())
        .collect();
    (deltas, frames.last().expect("at least one frame"))
}
