use std::collections::HashMap;
use std::sync::OnceLock;

use axum::extract::State;
use axum::http::StatusCode;
use axum::Json;
use serde::Deserialize;
use serde_json::{json, Value};
use tutorflow_core::access::{issue_token, Role};
use tutorflow_core::model::AvatarChoice;

use crate::auth::{hash_password, verify_password, Authed};
use crate::error::{ApiError, ApiResult, JsonBody, SCHEMA_VERSION};
use crate::state::AppState;

/// Verified against when the username is unknown, so both paths cost the
/// same.
fn dummy_hash() -> String {
    static HASH: OnceLock<String> = OnceLock::new();
    HASH.get_or_init(|| hash_password("not a real password")).clone()
}

#[derive(Deserialize)]
pub struct LoginBody {
    username: String,
    password: String,
}

pub async fn login(State(app): State<AppState>, JsonBody(body): JsonBody<LoginBody>) -> ApiResult<Json<Value>> {
    let account = app.account_by_username(body.username.trim());
    let hash = account.as_ref().map(|a| a.password_hash.clone()).unwrap_or_else(dummy_hash);
    let password = body.password;
    let ok = tokio::task::spawn_blocking(move || verify_password(&password, &hash))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?;
    let account = match account {
        Some(a) if ok => a,
        _ => return Err(ApiError::new(StatusCode::UNAUTHORIZED, "bad_credentials", "unknown user or wrong password")),
    };
    if account.disabled {
        return Err(ApiError::new(StatusCode::FORBIDDEN, "account_disabled", "account is disabled"));
    }
    let directory: HashMap<_, _> = [(account.user_id.clone(), account.role)].into();
    let token = issue_token(&app.key, &directory, &account.user_id, account.role, app.config.token_ttl_ms, app.now())
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(json!({
        "schema_version": SCHEMA_VERSION,
        "token": token.as_str(),
        "user_id": account.user_id,
        "display_name": account.display_name,
        "role": account.role,
        "expires_at": token.expires_at,
        "permissions": app.matrix.allowed(account.role),
    })))
}

pub async fn me(State(app): State<AppState>, Authed(claims): Authed) -> ApiResult<Json<Value>> {
    let account = app.accounts.get(claims.sub.as_str()).ok_or_else(|| ApiError::not_found("account"))?;
    Ok(Json(json!({
        "schema_version": SCHEMA_VERSION,
        "user_id": account.user_id,
        "username": account.username,
        "display_name": account.display_name,
        "role": account.role,
        "expires_at": claims.exp,
        "permissions": app.matrix.allowed(account.role),
    })))
}

/// The whole matrix, so a client can hide controls the server would refuse.
pub async fn permissions(State(app): State<AppState>, Authed(claims): Authed) -> Json<Value> {
    let matrix: serde_json::Map<String, Value> = Role::ALL
        .iter()
        .map(|r| (format!("{r:?}"), json!(app.matrix.allowed(*r))))
        .collect();
    Json(json!({
        "schema_version": SCHEMA_VERSION,
        "role": claims.role,
        "allowed": app.matrix.allowed(claims.role),
        "matrix": matrix,
    }))
}

pub async fn personas() -> Json<Value> {
    Json(json!({ "schema_version": SCHEMA_VERSION, "personas": AvatarChoice::catalog() }))
}
