//! Shared application state, entity records and startup.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tutorflow_core::access::{Action, Claims, Decision, Effect, ParentLinks, PermissionMatrix, Role, TokenKey};
use tutorflow_core::analytics::{EngagementEvent, EngagementKind};
use tutorflow_core::model::{AssistantConfig, LearnerProfile, SupportRequest};
use tutorflow_core::prompt::TemplateCatalog;
use tutorflow_core::rag::{CorpusIndex, DocumentSource};
use tutorflow_core::tutor::{LessonPlan, QuizDecision, QuizState, SessionDriver, SessionState, TranscriptLine};
use tutorflow_core::{DocId, EventId, LearnerId, PlanId, SessionId, SupportId, TimestampMs, UserId};
use tutorflow_gateway::{select_backend, Gateway};

use crate::auth::hash_password;
use crate::config::{ServerConfig, ServerConfigError};
use crate::error::{ApiError, ApiResult};
use crate::store::{EntityKind, EventStore, Repo, Store, StoreError};

pub type Clock = Arc<dyn Fn() -> TimestampMs + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as i64).unwrap_or(0))
}

/// Where new entity ids come from. Sequential ids keep golden files stable.
#[derive(Debug)]
pub enum IdSource {
    Random,
    Sequential(AtomicU64),
}

impl IdSource {
    pub fn sequential() -> Self {
        IdSource::Sequential(AtomicU64::new(1))
    }

    pub fn next(&self, prefix: &str) -> String {
        match self {
            IdSource::Random => uuid::Uuid::new_v4().to_string(),
            IdSource::Sequential(n) => format!("{prefix}-{}", n.fetch_add(1, Ordering::Relaxed)),
        }
    }
}

/// Turns an uploaded file into plain text. `None` means the format is not
/// supported.
pub trait TextExtractor: Send + Sync {
    fn extract(&self, filename: &str, content_type: Option<&str>, bytes: &[u8]) -> Option<String>;
}

/// Accepts UTF-8 text and nothing else.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlainTextExtractor;

impl TextExtractor for PlainTextExtractor {
    fn extract(&self, _filename: &str, _content_type: Option<&str>, bytes: &[u8]) -> Option<String> {
        let text = std::str::from_utf8(bytes).ok()?;
        let binary = text.chars().any(|c| c.is_control() && !matches!(c, '\n' | '\r' | '\t' | '\u{c}'));
        (!binary).then(|| text.strip_prefix('\u{feff}').unwrap_or(text).to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub user_id: UserId,
    pub username: String,
    pub display_name: String,
    pub password_hash: String,
    pub role: Role,
    #[serde(default)]
    pub disabled: bool,
    pub created_at: TimestampMs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportRecord {
    pub request: SupportRequest,
    pub config: AssistantConfig,
    pub plan_id: PlanId,
    pub session_id: SessionId,
    pub created_at: TimestampMs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub learner_id: LearnerId,
    pub support_id: SupportId,
    pub state: SessionState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizRecord {
    pub learner_id: LearnerId,
    pub session_id: SessionId,
    pub quiz: QuizState,
    pub decision: QuizDecision,
    pub finished_at: TimestampMs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: DocId,
    pub source: DocumentSource,
    pub owner: UserId,
    pub filename: String,
    pub content_type: Option<String>,
    pub size_bytes: u64,
    pub text: String,
    pub created_at: TimestampMs,
}

const LINKS_ID: &str = "parent-links";
const TOKEN_KEY_FILE: &str = "token.key";

/// Replaceable pieces, mostly for tests.
pub struct Hooks {
    pub clock: Clock,
    pub ids: IdSource,
    pub extractor: Arc<dyn TextExtractor>,
    /// Used instead of building a backend from the configuration.
    pub gateway: Option<Gateway>,
}

impl Default for Hooks {
    fn default() -> Self {
        Hooks { clock: system_clock(), ids: IdSource::Random, extractor: Arc::new(PlainTextExtractor), gateway: None }
    }
}

#[derive(Debug, Error)]
pub enum StartupError {
    #[error(transparent)]
    Config(#[from] ServerConfigError),
    #[error("storage: {0}")]
    Storage(#[from] StoreError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("permission matrix: {0}")]
    Matrix(String),
}

/// What startup had to skip.
#[derive(Debug, Clone, Default, Serialize)]
pub struct StartupReport {
    pub corrupt_records: Vec<String>,
    pub corrupt_event_lines: usize,
    pub curated_documents: usize,
}

pub struct App {
    pub config: ServerConfig,
    pub accounts: Repo<Account>,
    pub profiles: Repo<LearnerProfile>,
    pub supports: Repo<SupportRecord>,
    pub plans: Repo<LessonPlan>,
    pub sessions: Repo<SessionRecord>,
    pub quizzes: Repo<QuizRecord>,
    pub documents: Repo<DocumentRecord>,
    pub transcripts: Repo<Vec<TranscriptLine>>,
    links: Repo<ParentLinks>,
    pub events: EventStore,
    pub store: Arc<Store>,
    pub gateway: Gateway,
    pub catalog: Arc<TemplateCatalog>,
    pub corpus: Arc<RwLock<CorpusIndex>>,
    pub matrix: PermissionMatrix,
    pub key: TokenKey,
    pub driver: SessionDriver,
    pub clock: Clock,
    pub ids: IdSource,
    pub extractor: Arc<dyn TextExtractor>,
    pub report: StartupReport,
    session_locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    /// Serializes username checks with account creation.
    pub account_lock: Mutex<()>,
}

pub type AppState = Arc<App>;

impl App {
    pub fn open(config: ServerConfig, hooks: Hooks) -> Result<AppState, StartupError> {
        let store = Arc::new(Store::open(&config.storage_path)?);
        let mut report = StartupReport::default();
        macro_rules! repo {
            ($kind:expr) => {{
                let (repo, corrupt) = Repo::open(Arc::clone(&store), $kind)?;
                report.corrupt_records.extend(corrupt.into_iter().map(|id| format!("{}/{id}", $kind.dir())));
                repo
            }};
        }
        let (events, corrupt_lines) = EventStore::open(store.root())?;
        report.corrupt_event_lines = corrupt_lines;

        let matrix = match &config.permission_matrix {
            Some(path) => PermissionMatrix::from_json(&fs::read_to_string(path)?)
                .map_err(|e| StartupError::Matrix(e.to_string()))?,
            None => PermissionMatrix::default(),
        };
        let key = match &config.token_secret {
            Some(s) => TokenKey::new(s),
            None => TokenKey::new(load_or_create_secret(store.root())?),
        };
        let gateway = match hooks.gateway {
            Some(g) => g,
            None => select_backend(config.backend.clone()).map_err(ServerConfigError::from)?,
        };

        let app = App {
            accounts: repo!(EntityKind::Account),
            profiles: repo!(EntityKind::Profile),
            supports: repo!(EntityKind::Support),
            plans: repo!(EntityKind::Plan),
            sessions: repo!(EntityKind::Session),
            quizzes: repo!(EntityKind::Quiz),
            documents: repo!(EntityKind::Document),
            transcripts: repo!(EntityKind::Transcript),
            links: repo!(EntityKind::Link),
            events,
            store,
            gateway,
            catalog: Arc::new(TemplateCatalog::builtin()),
            corpus: Arc::new(RwLock::new(CorpusIndex::new())),
            matrix,
            key,
            driver: SessionDriver::default(),
            clock: hooks.clock,
            ids: hooks.ids,
            extractor: hooks.extractor,
            report,
            session_locks: Mutex::new(HashMap::new()),
            account_lock: Mutex::new(()),
            config,
        };
        let mut app = app;
        app.reindex()?;
        app.bootstrap_admin()?;
        for id in &app.report.corrupt_records {
            tracing::warn!(record = %id, "skipping corrupt record");
        }
        if app.report.corrupt_event_lines > 0 {
            tracing::warn!(lines = app.report.corrupt_event_lines, "skipping corrupt event log lines");
        }
        Ok(Arc::new(app))
    }

    fn reindex(&mut self) -> Result<(), StartupError> {
        let mut corpus = self.corpus.write().unwrap();
        if let Some(dir) = &self.config.corpus_dir {
            let mut paths: Vec<_> = fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
            paths.sort();
            for path in paths.into_iter().filter(|p| p.is_file()) {
                let Ok(text) = fs::read_to_string(&path) else {
                    tracing::warn!(path = %path.display(), "curated file is not UTF-8, skipped");
                    continue;
                };
                let stem = path.file_stem().unwrap_or_default().to_string_lossy();
                let id: String = stem.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '-' }).collect();
                if corpus.ingest_document(&DocId::new(format!("curated-{id}")), &text, DocumentSource::Curated).is_ok() {
                    self.report.curated_documents += 1;
                }
            }
        }
        for doc in self.documents.values() {
            let _ = corpus.ingest_document(&doc.doc_id, &doc.text, doc.source.clone());
        }
        Ok(())
    }

    fn bootstrap_admin(&self) -> Result<(), StartupError> {
        let Some((username, password)) = &self.config.bootstrap_admin else {
            return Ok(());
        };
        if self.account_by_username(username).is_none() {
            let account = Account {
                user_id: UserId::new(self.ids.next("user")),
                username: username.clone(),
                display_name: username.clone(),
                password_hash: hash_password(password),
                role: Role::Administrator,
                disabled: false,
                created_at: self.now(),
            };
            self.accounts.put(account.user_id.as_str(), &account, account.created_at)?;
        }
        Ok(())
    }

    pub fn now(&self) -> TimestampMs {
        (self.clock)()
    }

    pub fn account_by_username(&self, username: &str) -> Option<Account> {
        self.accounts.filter(|a| a.username == username).into_iter().next()
    }

    pub fn links(&self) -> ParentLinks {
        self.links.get(LINKS_ID).unwrap_or_default()
    }

    pub fn update_links(&self, f: impl FnOnce(&mut ParentLinks)) -> Result<ParentLinks, StoreError> {
        self.links.update(LINKS_ID, self.now(), |cur| {
            let mut links = cur.unwrap_or_default();
            f(&mut links);
            links
        })
    }

    /// Role-level check only, for requests whose resource is looked up
    /// afterwards.
    pub fn require(&self, claims: &Claims, action: Action) -> ApiResult<()> {
        if self.matrix.effect(claims.role, action) == Effect::Allow {
            Ok(())
        } else {
            Err(ApiError::deny(tutorflow_core::access::DenyReason::Forbidden))
        }
    }

    /// Full check including ownership and parent links.
    pub fn authorize(&self, claims: &Claims, action: Action, owner: &UserId) -> ApiResult<()> {
        match tutorflow_core::access::authorize_claims(&self.matrix, &self.links(), claims, action, owner) {
            Decision::Allow => Ok(()),
            Decision::Deny(reason) => Err(ApiError::deny(reason)),
        }
    }

    pub fn session_lock(&self, session_id: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.session_locks.lock().unwrap();
        Arc::clone(locks.entry(session_id.to_owned()).or_default())
    }

    pub fn record(&self, learner: &LearnerId, support: Option<&SupportId>, kind: EngagementKind) -> io::Result<()> {
        let event = EngagementEvent::new(EventId::new(self.ids.next("event")), learner.clone(), support.cloned(), kind, self.now());
        self.events.append(event).map(|_| ())
    }

    /// The learner's most recently created support, if any.
    pub fn latest_support(&self, learner: &LearnerId) -> Option<SupportRecord> {
        self.supports
            .filter(|s| &s.request.learner_id == learner)
            .into_iter()
            .max_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.request.support_id.cmp(&b.request.support_id)))
    }
}

fn load_or_create_secret(root: &Path) -> io::Result<String> {
    let path = root.join(TOKEN_KEY_FILE);
    match fs::read_to_string(&path) {
        Ok(s) if !s.trim().is_empty() => return Ok(s.trim().to_owned()),
        Ok(_) => {}
        Err(e) if e.kind() == io::ErrorKind::NotFound => {}
        Err(e) => return Err(e),
    }
    let secret = format!("{}{}", uuid::Uuid::new_v4().simple(), uuid::Uuid::new_v4().simple());
    let tmp = root.join(".token.key.tmp");
    fs::write(&tmp, &secret)?;
    fs::File::open(&tmp)?.sync_all()?;
    fs::rename(&tmp, &path)?;
    Ok(secret)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_text_extractor() {
        let x = PlainTextExtractor;
        assert_eq!(x.extract("a.txt", None, "\u{feff}hello\n".as_bytes()).as_deref(), Some("hello\n"));
        assert_eq!(x.extract("a.bin", None, &[0x00, 0x01, 0x02]), None);
        assert_eq!(x.extract("a.bin", None, &[0xff, 0xfe, 0x00]), None);
    }

    #[test]
    fn sequential_ids() {
        let ids = IdSource::sequential();
        assert_eq!(ids.next("user"), "user-1");
        assert_eq!(ids.next("plan"), "plan-2");
    }

    #[test]
    fn token_secret_persists() {
        let dir = tempfile::tempdir().unwrap();
        let a = load_or_create_secret(dir.path()).unwrap();
        assert_eq!(load_or_create_secret(dir.path()).unwrap(), a);
        assert!(a.len() >= 64);
    }
}
