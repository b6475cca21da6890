use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::Json;
use serde::Deserialize;
use serde_json::{json, Value};
use tutorflow_core::access::{Action, Role};
use tutorflow_core::UserId;

use crate::auth::{hash_password, Authed};
use crate::error::{ApiError, ApiResult, JsonBody, SCHEMA_VERSION};
use crate::state::{Account, AppState};
use crate::store::valid_id;

pub const MIN_PASSWORD_LEN: usize = 8;

#[derive(Deserialize)]
pub struct NewUser {
    username: String,
    password: String,
    role: Role,
    #[serde(default)]
    display_name: Option<String>,
    #[serde(default)]
    user_id: Option<String>,
}

pub async fn create_user(
    State(app): State<AppState>,
    Authed(claims): Authed,
    JsonBody(body): JsonBody<NewUser>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    app.require(&claims, Action::ManageUsers)?;
    app.authorize(&claims, Action::ManageUsers, &claims.sub)?;
    let username = body.username.trim().to_owned();
    if username.is_empty() {
        return Err(ApiError::bad_request("username must not be empty"));
    }
    if body.password.chars().count() < MIN_PASSWORD_LEN {
        return Err(ApiError::bad_request(format!("password needs at least {MIN_PASSWORD_LEN} characters")));
    }
    let user_id = UserId::new(body.user_id.unwrap_or_else(|| app.ids.next("user")));
    if !valid_id(user_id.as_str()) {
        return Err(ApiError::bad_request(format!("invalid user id `{user_id}`")));
    }
    let password = body.password;
    let password_hash = tokio::task::spawn_blocking(move || hash_password(&password))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?;
    let account = Account {
        user_id: user_id.clone(),
        display_name: body.display_name.unwrap_or_else(|| username.clone()),
        username,
        password_hash,
        role: body.role,
        disabled: false,
        created_at: app.now(),
    };
    {
        let _guard = app.account_lock.lock().unwrap();
        if app.account_by_username(&account.username).is_some() || app.accounts.contains(user_id.as_str()) {
            return Err(ApiError::conflict("duplicate_user", "username or user id already taken"));
        }
        app.accounts.put(user_id.as_str(), &account, account.created_at)?;
    }
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "schema_version": SCHEMA_VERSION,
            "user_id": account.user_id,
            "username": account.username,
            "role": account.role,
        })),
    ))
}

pub async fn disable_user(
    State(app): State<AppState>,
    Authed(claims): Authed,
    Path(id): Path<String>,
) -> ApiResult<Json<Value>> {
    app.require(&claims, Action::ManageUsers)?;
    app.authorize(&claims, Action::ManageUsers, &claims.sub)?;
    if !app.accounts.contains(&id) {
        return Err(ApiError::not_found(format!("user `{id}`")));
    }
    let account = app.accounts.update(&id, app.now(), |cur| Account { disabled: true, ..cur.expect("checked") })?;
    Ok(Json(json!({ "schema_version": SCHEMA_VERSION, "user_id": account.user_id, "disabled": true })))
}

#[derive(Deserialize)]
pub struct LinkBody {
    parent: UserId,
    child: UserId,
}

pub async fn link(
    State(app): State<AppState>,
    Authed(claims): Authed,
    JsonBody(body): JsonBody<LinkBody>,
) -> ApiResult<Json<Value>> {
    app.require(&claims, Action::ManageUsers)?;
    app.authorize(&claims, Action::ManageUsers, &claims.sub)?;
    let role = |id: &UserId| app.accounts.get(id.as_str()).map(|a| a.role);
    if role(&body.parent) != Some(Role::Parent) {
        return Err(ApiError::bad_request(format!("`{}` is not a parent account", body.parent)));
    }
    if role(&body.child) != Some(Role::Learner) {
        return Err(ApiError::bad_request(format!("`{}` is not a learner account", body.child)));
    }
    let links = app.update_links(|l| {
        l.link(body.parent.clone(), body.child.clone());
    })?;
    let children: Vec<&UserId> = links.children_of(&body.parent).collect();
    Ok(Json(json!({ "schema_version": SCHEMA_VERSION, "parent": body.parent, "children": children })))
}

pub async fn llm_health(State(app): State<AppState>, Authed(claims): Authed) -> ApiResult<Json<Value>> {
    app.require(&claims, Action::ConfigureModels)?;
    app.authorize(&claims, Action::ConfigureModels, &claims.sub)?;
    let health = app.gateway.health_check().await;
    Ok(Json(json!({
        "schema_version": SCHEMA_VERSION,
        "mode": app.gateway.mode(),
        "model": app.gateway.model(),
        "health": health,
    })))
}
