mod admin;
mod auth;
mod learners;
mod sessions;
mod supports;

use axum::extract::{DefaultBodyLimit, State};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};

use crate::error::SCHEMA_VERSION;
use crate::state::AppState;

pub use sessions::{legal_events, session_view};

/// Multipart framing allowance on top of the upload cap.
const MULTIPART_SLACK: usize = 64 * 1024;

pub fn router(app: AppState) -> Router {
    let upload_limit = app.config.upload_cap_bytes.saturating_add(MULTIPART_SLACK);
    Router::new()
        .route("/api/health", get(health))
        .route("/api/auth/login", post(auth::login))
        .route("/api/auth/me", get(auth::me))
        .route("/api/permissions", get(auth::permissions))
        .route("/api/personas", get(auth::personas))
        .route("/api/supports", post(supports::create))
        .route("/api/supports/{id}", get(supports::show))
        .route(
            "/api/supports/{id}/materials",
            post(supports::upload).layer(DefaultBodyLimit::max(upload_limit)),
        )
        .route("/api/content/documents", post(supports::curated))
        .route("/api/sessions/{id}", get(sessions::show))
        .route("/api/sessions/{id}/events", post(sessions::event))
        .route("/api/sessions/{id}/chat", post(sessions::chat))
        .route("/api/sessions/{id}/transcript", get(sessions::transcript))
        .route("/api/learners/{id}/events", post(learners::events))
        .route("/api/learners/{id}/dashboard", get(learners::dashboard))
        .route("/api/learners/{id}/path", get(learners::path))
        .route("/api/admin/users", post(admin::create_user))
        .route("/api/admin/users/{id}/disable", post(admin::disable_user))
        .route("/api/admin/links", post(admin::link))
        .route("/api/admin/llm/health", get(admin::llm_health))
        .with_state(app)
}

async fn health(State(app): State<AppState>) -> Json<Value> {
    Json(json!({
        "schema_version": SCHEMA_VERSION,
        "status": "ok",
        "llm_mode": app.gateway.mode(),
        "startup": app.report,
    }))
}
