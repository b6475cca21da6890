use argon2::password_hash::{PasswordHash, PasswordHasher, PasswordVerifier, SaltString};
use argon2::Argon2;
use axum::extract::FromRequestParts;
use axum::http::header::AUTHORIZATION;
use axum::http::request::Parts;
use axum::http::StatusCode;
use tutorflow_core::access::{verify_token, Claims};

use crate::error::ApiError;
use crate::state::AppState;

pub fn hash_password(password: &str) -> String {
    // a v4 uuid is 122 bits from the OS generator, plenty for a salt
    let salt = SaltString::encode_b64(uuid::Uuid::new_v4().as_bytes()).expect("16 bytes is a valid salt");
    Argon2::default()
        .hash_password(password.as_bytes(), &salt)
        .expect("argon2 accepts any password")
        .to_string()
}

pub fn verify_password(password: &str, hash: &str) -> bool {
    PasswordHash::new(hash)
        .map(|h| Argon2::default().verify_password(password.as_bytes(), &h).is_ok())
        .unwrap_or(false)
}

/// Verified bearer claims of an active account.
#[derive(Debug, Clone)]
pub struct Authed(pub Claims);

impl FromRequestParts<AppState> for Authed {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, app: &AppState) -> Result<Self, Self::Rejection> {
        let header = parts
            .headers
            .get(AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "missing_token", "bearer token required"))?;
        let token = header
            .strip_prefix("Bearer ")
            .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "missing_token", "bearer token required"))?;
        let claims = verify_token(&app.key, token.trim(), app.now()).map_err(ApiError::deny)?;
        match app.accounts.get(claims.sub.as_str()) {
            Some(a) if a.role != claims.role => {
                Err(ApiError::new(StatusCode::UNAUTHORIZED, "bad_token", "token role no longer matches the account"))
            }
            Some(a) if a.disabled => Err(ApiError::new(StatusCode::FORBIDDEN, "account_disabled", "account is disabled")),
            Some(_) => Ok(Authed(claims)),
            None => Err(ApiError::new(StatusCode::UNAUTHORIZED, "bad_token", "unknown account")),
        }
    }
}
