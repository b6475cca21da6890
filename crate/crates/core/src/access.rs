//! Roles, the permission matrix, signed bearer tokens and parent scoping.
//!
//! A token is `base64url(claims).base64url(hmac_sha256(claims))`, where the
//! claims are compact JSON. Verification is stateless.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use thiserror::Error;

use crate::analytics::{CognitiveEngagementScore, DashboardSummary, PathEntry};
use crate::ids::{LearnerId, UserId};
use crate::TimestampMs;

type HmacSha256 = Hmac<Sha256>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Learner,
    Teacher,
    Parent,
    Administrator,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Learner, Role::Teacher, Role::Parent, Role::Administrator];
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| format!("{r:?}").eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown role `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    ViewOwnPath,
    ChatWithTutor,
    SetGoals,
    ViewStudentAnalytics,
    ConfigureContent,
    ViewChildSummary,
    ManageUsers,
    ConfigureModels,
    UploadMaterial,
    ViewOwnDashboard,
}

impl Action {
    pub const ALL: [Action; 10] = [
        Action::ViewOwnPath,
        Action::ChatWithTutor,
        Action::SetGoals,
        Action::ViewStudentAnalytics,
        Action::ConfigureContent,
        Action::ViewChildSummary,
        Action::ManageUsers,
        Action::ConfigureModels,
        Action::UploadMaterial,
        Action::ViewOwnDashboard,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    Allow,
    Deny,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Error)]
pub enum DenyReason {
    #[error("token expired")]
    Expired,
    #[error("token signature is invalid")]
    BadSignature,
    #[error("action not permitted for this role")]
    Forbidden,
    #[error("learner is not linked to this parent")]
    NotLinked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Allow,
    Deny(DenyReason),
}

impl Decision {
    pub fn is_allow(self) -> bool {
        self == Decision::Allow
    }
}

/// Every (role, action) pair with an explicit effect.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermissionMatrix {
    entries: BTreeMap<(Role, Action), Effect>,
}

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("permission matrix is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl PermissionMatrix {
    /// Everything denied.
    pub fn deny_all() -> Self {
        let entries = Role::ALL
            .iter()
            .flat_map(|r| Action::ALL.iter().map(move |a| ((*r, *a), Effect::Deny)))
            .collect();
        PermissionMatrix { entries }
    }

    pub fn set(&mut self, role: Role, action: Action, effect: Effect) {
        self.entries.insert((role, action), effect);
    }

    pub fn effect(&self, role: Role, action: Action) -> Effect {
        self.entries.get(&(role, action)).copied().unwrap_or(Effect::Deny)
    }

    pub fn allowed(&self, role: Role) -> Vec<Action> {
        Action::ALL.into_iter().filter(|a| self.effect(role, *a) == Effect::Allow).collect()
    }

    /// Reads `{"Learner": {"view_own_path": "allow", ...}, ...}`. Pairs the
    /// file leaves out are denied.
    pub fn from_json(json: &str) -> Result<Self, MatrixError> {
        let raw: BTreeMap<Role, BTreeMap<Action, Effect>> = serde_json::from_str(json)?;
        let mut m = PermissionMatrix::deny_all();
        for (role, actions) in raw {
            for (action, effect) in actions {
                m.set(role, action, effect);
            }
        }
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        let mut raw: BTreeMap<Role, BTreeMap<Action, Effect>> = BTreeMap::new();
        for ((role, action), effect) in &self.entries {
            raw.entry(*role).or_default().insert(*action, *effect);
        }
        serde_json::to_string_pretty(&raw).expect("matrix serializes")
    }
}

impl Default for PermissionMatrix {
    fn default() -> Self {
        use Action::*;
        let mut m = PermissionMatrix::deny_all();
        let grants: [(Role, &[Action]); 4] = [
            (Role::Learner, &[ViewOwnPath, ChatWithTutor, SetGoals, ViewOwnDashboard, UploadMaterial]),
            (Role::Teacher, &[ViewStudentAnalytics, ConfigureContent]),
            (Role::Parent, &[ViewChildSummary]),
            (Role::Administrator, &[ManageUsers, ConfigureModels, ConfigureContent, ViewStudentAnalytics]),
        ];
        for (role, actions) in grants {
            for a in actions {
                m.set(role, *a, Effect::Allow);
            }
        }
        m
    }
}

/// HMAC key for token signatures. Never printed.
#[derive(Clone)]
pub struct TokenKey(Vec<u8>);

impl TokenKey {
    pub fn new(secret: impl AsRef<[u8]>) -> Self {
        TokenKey(secret.as_ref().to_vec())
    }

    fn mac(&self) -> HmacSha256 {
        HmacSha256::new_from_slice(&self.0).expect("HMAC accepts any key length")
    }
}

impl fmt::Debug for TokenKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("TokenKey(<redacted>)")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claims {
    pub sub: UserId,
    pub role: Role,
    pub iat: TimestampMs,
    pub exp: TimestampMs,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthToken {
    pub subject_id: UserId,
    pub role: Role,
    pub issued_at: TimestampMs,
    pub expires_at: TimestampMs,
    pub signature: String,
    encoded: String,
}

impl AuthToken {
    /// The bearer string.
    pub fn as_str(&self) -> &str {
        &self.encoded
    }
}

impl fmt::Display for AuthToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encoded)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenError {
    #[error("ttl must be positive")]
    InvalidTtl,
    #[error("unknown subject `{0}` for that role")]
    UnknownSubject(UserId),
}

/// Looks up which role a user holds.
pub trait SubjectDirectory {
    fn role_of(&self, subject: &UserId) -> Option<Role>;
}

impl SubjectDirectory for HashMap<UserId, Role> {
    fn role_of(&self, subject: &UserId) -> Option<Role> {
        self.get(subject).copied()
    }
}

impl SubjectDirectory for BTreeMap<UserId, Role> {
    fn role_of(&self, subject: &UserId) -> Option<Role> {
        self.get(subject).copied()
    }
}

pub fn issue_token(
    key: &TokenKey,
    directory: &dyn SubjectDirectory,
    subject_id: &UserId,
    role: Role,
    ttl_ms: i64,
    now: TimestampMs,
) -> Result<AuthToken, TokenError> {
    if ttl_ms <= 0 {
        return Err(TokenError::InvalidTtl);
    }
    if directory.role_of(subject_id) != Some(role) {
        return Err(TokenError::UnknownSubject(subject_id.clone()));
    }
    let claims = Claims { sub: subject_id.clone(), role, iat: now, exp: now.saturating_add(ttl_ms) };
    let payload = URL_SAFE_NO_PAD.encode(serde_json::to_vec(&claims).expect("claims serialize"));
    let mut mac = key.mac();
    mac.update(payload.as_bytes());
    let signature = URL_SAFE_NO_PAD.encode(mac.finalize().into_bytes());
    Ok(AuthToken {
        subject_id: claims.sub,
        role,
        issued_at: claims.iat,
        expires_at: claims.exp,
        encoded: format!("{payload}.{signature}"),
        signature,
    })
}

/// Checks signature, then expiry. Anything unparseable is a bad signature.
pub fn verify_token(key: &TokenKey, token: &str, now: TimestampMs) -> Result<Claims, DenyReason> {
    let (payload, signature) = token.split_once('.').ok_or(DenyReason::BadSignature)?;
    let sig = URL_SAFE_NO_PAD.decode(signature).map_err(|_| DenyReason::BadSignature)?;
    let mut mac = key.mac();
    mac.update(payload.as_bytes());
    mac.verify_slice(&sig).map_err(|_| DenyReason::BadSignature)?;
    let raw = URL_SAFE_NO_PAD.decode(payload).map_err(|_| DenyReason::BadSignature)?;
    let claims: Claims = serde_json::from_slice(&raw).map_err(|_| DenyReason::BadSignature)?;
    if claims.exp <= claims.iat {
        return Err(DenyReason::BadSignature);
    }
    if now >= claims.exp {
        return Err(DenyReason::Expired);
    }
    Ok(claims)
}

/// Administrator-created parent to child links.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParentLinks {
    links: BTreeSet<(UserId, UserId)>,
}

impl ParentLinks {
    pub fn link(&mut self, parent: UserId, child: UserId) -> bool {
        self.links.insert((parent, child))
    }

    pub fn unlink(&mut self, parent: &UserId, child: &UserId) -> bool {
        self.links.remove(&(parent.clone(), child.clone()))
    }

    pub fn is_linked(&self, parent: &UserId, child: &UserId) -> bool {
        self.links.contains(&(parent.clone(), child.clone()))
    }

    pub fn children_of<'a>(&'a self, parent: &'a UserId) -> impl Iterator<Item = &'a UserId> + 'a {
        self.links.iter().filter(move |(p, _)| p == parent).map(|(_, c)| c)
    }
}

/// Matrix lookup restricted by ownership. Learners act only on their own
/// resources; parents only on linked children.
pub fn authorize_claims(
    matrix: &PermissionMatrix,
    links: &ParentLinks,
    claims: &Claims,
    action: Action,
    resource_owner: &UserId,
) -> Decision {
    if matrix.effect(claims.role, action) != Effect::Allow {
        return Decision::Deny(DenyReason::Forbidden);
    }
    match claims.role {
        Role::Learner if &claims.sub != resource_owner => Decision::Deny(DenyReason::Forbidden),
        Role::Parent if !links.is_linked(&claims.sub, resource_owner) => Decision::Deny(DenyReason::NotLinked),
        _ => Decision::Allow,
    }
}

pub fn authorize(
    key: &TokenKey,
    matrix: &PermissionMatrix,
    links: &ParentLinks,
    token: &str,
    action: Action,
    resource_owner: &UserId,
    now: TimestampMs,
) -> Decision {
    match verify_token(key, token, now) {
        Ok(claims) => authorize_claims(matrix, links, &claims, action, resource_owner),
        Err(reason) => Decision::Deny(reason),
    }
}

/// What a parent may see: aggregates only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParentSummary {
    pub learner_id: LearnerId,
    pub engagement: CognitiveEngagementScore,
    pub path: Vec<PathEntry>,
    pub sessions_total: u32,
    pub sessions_completed: u32,
}

pub fn parent_scope_filter(
    links: &ParentLinks,
    parent: &UserId,
    dashboard: &DashboardSummary,
) -> Result<ParentSummary, DenyReason> {
    if !links.is_linked(parent, &dashboard.learner_id.clone().into()) {
        return Err(DenyReason::NotLinked);
    }
    Ok(ParentSummary {
        learner_id: dashboard.learner_id.clone(),
        engagement: dashboard.engagement,
        path: dashboard.path.clone(),
        sessions_total: dashboard.sessions_total,
        sessions_completed: dashboard.sessions_completed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const NOW: TimestampMs = 1_700_000_000_000;

    fn dir() -> HashMap<UserId, Role> {
        [("L1", Role::Learner), ("L2", Role::Learner), ("P1", Role::Parent), ("T1", Role::Teacher), ("A1", Role::Administrator)]
            .into_iter()
            .map(|(u, r)| (UserId::new(u), r))
            .collect()
    }

    fn key() -> TokenKey {
        TokenKey::new("test-secret")
    }

    fn token(user: &str, role: Role) -> AuthToken {
        issue_token(&key(), &dir(), &UserId::new(user), role, 3_600_000, NOW).unwrap()
    }

    fn check(t: &AuthToken, action: Action, owner: &str, links: &ParentLinks) -> Decision {
        authorize(&key(), &PermissionMatrix::default(), links, t.as_str(), action, &UserId::new(owner), NOW + 1000)
    }

    #[test]
    fn learner_on_own_resources() {
        let t = token("L1", Role::Learner);
        assert_eq!(t.expires_at - t.issued_at, 3_600_000);
        let links = ParentLinks::default();
        assert_eq!(check(&t, Action::ViewOwnPath, "L1", &links), Decision::Allow);
        assert_eq!(check(&t, Action::ViewOwnPath, "L2", &links), Decision::Deny(DenyReason::Forbidden));
        assert_eq!(check(&t, Action::ManageUsers, "L1", &links), Decision::Deny(DenyReason::Forbidden));
    }

    #[test]
    fn parent_needs_link() {
        let t = token("P1", Role::Parent);
        let mut links = ParentLinks::default();
        assert_eq!(check(&t, Action::ViewChildSummary, "L1", &links), Decision::Deny(DenyReason::NotLinked));
        links.link(UserId::new("P1"), UserId::new("L1"));
        assert_eq!(check(&t, Action::ViewChildSummary, "L1", &links), Decision::Allow);
        assert_eq!(check(&t, Action::ChatWithTutor, "L1", &links), Decision::Deny(DenyReason::Forbidden));
        assert_eq!(check(&t, Action::ViewOwnDashboard, "L1", &links), Decision::Deny(DenyReason::Forbidden));
    }

    #[test]
    fn expiry_and_tampering() {
        let t = token("L1", Role::Learner);
        let links = ParentLinks::default();
        let late = authorize(&key(), &PermissionMatrix::default(), &links, t.as_str(), Action::ViewOwnPath, &UserId::new("L1"), t.expires_at);
        assert_eq!(late, Decision::Deny(DenyReason::Expired));

        let (payload, sig) = t.as_str().split_once('.').unwrap();
        let mut claims: Claims = serde_json::from_slice(&URL_SAFE_NO_PAD.decode(payload).unwrap()).unwrap();
        claims.role = Role::Administrator;
        let forged = format!("{}.{sig}", URL_SAFE_NO_PAD.encode(serde_json::to_vec(&claims).unwrap()));
        assert_eq!(verify_token(&key(), &forged, NOW), Err(DenyReason::BadSignature));
        assert_eq!(verify_token(&TokenKey::new("other"), t.as_str(), NOW), Err(DenyReason::BadSignature));
        assert_eq!(verify_token(&key(), "garbage", NOW), Err(DenyReason::BadSignature));
    }

    #[test]
    fn issuance_errors() {
        let d = dir();
        assert_eq!(issue_token(&key(), &d, &UserId::new("L1"), Role::Learner, 0, NOW), Err(TokenError::InvalidTtl));
        assert!(matches!(
            issue_token(&key(), &d, &UserId::new("L1"), Role::Administrator, 10, NOW),
            Err(TokenError::UnknownSubject(_))
        ));
        assert!(matches!(
            issue_token(&key(), &d, &UserId::new("nobody"), Role::Learner, 10, NOW),
            Err(TokenError::UnknownSubject(_))
        ));
    }

    #[test]
    fn matrix_json_defaults_to_deny() {
        let m = PermissionMatrix::from_json(r#"{"Teacher": {"manage_users": "allow"}}"#).unwrap();
        assert_eq!(m.effect(Role::Teacher, Action::ManageUsers), Effect::Allow);
        assert_eq!(m.effect(Role::Learner, Action::ViewOwnPath), Effect::Deny);
        let d = PermissionMatrix::default();
        assert_eq!(PermissionMatrix::from_json(&d.to_json()).unwrap(), d);
        assert!(PermissionMatrix::from_json(r#"{"Teacher": {"fly": "allow"}}"#).is_err());
    }

    #[test]
    fn key_is_redacted() {
        assert!(!format!("{:?}", key()).contains("test-secret"));
    }
}
