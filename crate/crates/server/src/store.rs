//! Durable storage: one JSON document per entity under a directory per
//! kind, plus an append-only JSON-lines event log.
//!
//! Writes go to a temporary file that is synced and renamed over the
//! target, so a crash leaves either the old or the new document. Every
//! write is on disk before the caller acknowledges it.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tutorflow_core::analytics::{EngagementEvent, EventLog, RecordOutcome};
use tutorflow_core::TimestampMs;

pub const ENTITY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntityKind {
    Account,
    Profile,
    Support,
    Plan,
    Session,
    Quiz,
    Document,
    Transcript,
    Link,
}

impl EntityKind {
    pub const ALL: [EntityKind; 9] = [
        EntityKind::Account,
        EntityKind::Profile,
        EntityKind::Support,
        EntityKind::Plan,
        EntityKind::Session,
        EntityKind::Quiz,
        EntityKind::Document,
        EntityKind::Transcript,
        EntityKind::Link,
    ];

    pub fn dir(self) -> &'static str {
        match self {
            EntityKind::Account => "accounts",
            EntityKind::Profile => "profiles",
            EntityKind::Support => "supports",
            EntityKind::Plan => "plans",
            EntityKind::Session => "sessions",
            EntityKind::Quiz => "quizzes",
            EntityKind::Document => "documents",
            EntityKind::Transcript => "transcripts",
            EntityKind::Link => "links",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredEntity {
    pub entity_kind: EntityKind,
    pub id: String,
    pub schema_version: u32,
    pub payload: Value,
    pub updated_at: TimestampMs,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{0:?} `{1}` not found")]
    NotFound(EntityKind, String),
    #[error("stored record `{0}` is corrupt")]
    StorageCorrupt(String),
    #[error("invalid entity id `{0}`")]
    InvalidId(String),
    #[error("storage i/o: {0}")]
    Io(#[from] io::Error),
}

/// Ids become file names, so only a conservative alphabet is accepted.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Store> {
        let root = root.into();
        for kind in EntityKind::ALL {
            fs::create_dir_all(root.join(kind.dir()))?;
        }
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, kind: EntityKind, id: &str) -> PathBuf {
        self.root.join(kind.dir()).join(format!("{id}.json"))
    }

    pub fn store(&self, kind: EntityKind, id: &str, payload: Value, now: TimestampMs) -> Result<StoredEntity, StoreError> {
        if !valid_id(id) {
            return Err(StoreError::InvalidId(id.to_owned()));
        }
        let entity = StoredEntity {
            entity_kind: kind,
            id: id.to_owned(),
            schema_version: ENTITY_SCHEMA_VERSION,
            payload,
            updated_at: now,
        };
        let bytes = serde_json::to_vec_pretty(&entity).map_err(io::Error::other)?;
        write_atomic(&self.path(kind, id), &bytes)?;
        Ok(entity)
    }

    pub fn load(&self, kind: EntityKind, id: &str) -> Result<StoredEntity, StoreError> {
        if !valid_id(id) {
            return Err(StoreError::InvalidId(id.to_owned()));
        }
        let bytes = match fs::read(self.path(kind, id)) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::NotFound(kind, id.to_owned())),
            Err(e) => return Err(e.into()),
        };
        let entity: StoredEntity =
            serde_json::from_slice(&bytes).map_err(|_| StoreError::StorageCorrupt(id.to_owned()))?;
        if entity.entity_kind != kind || entity.id != id || entity.schema_version < 1 {
            return Err(StoreError::StorageCorrupt(id.to_owned()));
        }
        Ok(entity)
    }

    /// Ids of every stored entity of `kind`, sorted.
    pub fn ids(&self, kind: EntityKind) -> io::Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(self.root.join(kind.dir()))? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if let Some(id) = name.strip_suffix(".json") {
                if valid_id(id) {
                    ids.push(id.to_owned());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn write_blob(&self, kind: EntityKind, id: &str, bytes: &[u8]) -> Result<(), StoreError> {
        if !valid_id(id) {
            return Err(StoreError::InvalidId(id.to_owned()));
        }
        write_atomic(&self.root.join(kind.dir()).join(format!("{id}.raw")), bytes)?;
        Ok(())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().expect("entity paths have a parent");
    let tmp = dir.join(format!(".{}.{}.tmp", path.file_name().unwrap().to_string_lossy(), uuid::Uuid::new_v4().simple()));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    sync_dir(dir)
}

#[cfg(unix)]
fn sync_dir(dir: &Path) -> io::Result<()> {
    File::open(dir)?.sync_all()
}

#[cfg(not(unix))]
fn sync_dir(_dir: &Path) -> io::Result<()> {
    Ok(())
}

/// A typed, cached view of one entity kind. Reads come from memory; writes
/// hit disk first and are serialized per repository.
pub struct Repo<T> {
    kind: EntityKind,
    store: Arc<Store>,
    cache: RwLock<HashMap<String, T>>,
    write: Mutex<()>,
}

impl<T: Serialize + DeserializeOwned + Clone> Repo<T> {
    /// Loads every readable record. Corrupt ones are reported and skipped.
    pub fn open(store: Arc<Store>, kind: EntityKind) -> io::Result<(Repo<T>, Vec<String>)> {
        let mut cache = HashMap::new();
        let mut corrupt = Vec::new();
        for id in store.ids(kind)? {
            let typed = store
                .load(kind, &id)
                .ok()
                .and_then(|e| serde_json::from_value::<T>(e.payload).ok());
            match typed {
                Some(v) => {
                    cache.insert(id, v);
                }
                None => corrupt.push(id),
            }
        }
        Ok((Repo { kind, store, cache: RwLock::new(cache), write: Mutex::new(()) }, corrupt))
    }

    pub fn get(&self, id: &str) -> Option<T> {
        self.cache.read().unwrap().get(id).cloned()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.cache.read().unwrap().contains_key(id)
    }

    pub fn put(&self, id: &str, value: &T, now: TimestampMs) -> Result<(), StoreError> {
        let payload = serde_json::to_value(value).map_err(io::Error::other)?;
        let _guard = self.write.lock().unwrap();
        self.store.store(self.kind, id, payload, now)?;
        self.cache.write().unwrap().insert(id.to_owned(), value.clone());
        Ok(())
    }

    /// Read-modify-write under the repository's write lock.
    pub fn update(&self, id: &str, now: TimestampMs, f: impl FnOnce(Option<T>) -> T) -> Result<T, StoreError> {
        let _guard = self.write.lock().unwrap();
        let next = f(self.get(id));
        let payload = serde_json::to_value(&next).map_err(io::Error::other)?;
        self.store.store(self.kind, id, payload, now)?;
        self.cache.write().unwrap().insert(id.to_owned(), next.clone());
        Ok(next)
    }

    pub fn values(&self) -> Vec<T> {
        self.cache.read().unwrap().values().cloned().collect()
    }

    pub fn filter(&self, keep: impl Fn(&T) -> bool) -> Vec<T> {
        self.cache.read().unwrap().values().filter(|v| keep(v)).cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.cache.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The engagement event log, mirrored in memory.
pub struct EventStore {
    file: Mutex<File>,
    log: RwLock<EventLog>,
}

impl EventStore {
    pub const FILE: &'static str = "events.jsonl";

    /// Replays the log. A torn last line from a crash is reported and a
    /// newline is added so later appends start clean.
    pub fn open(root: &Path) -> io::Result<(EventStore, usize)> {
        let path = root.join(Self::FILE);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(e),
        };
        let (log, corrupt) = EventLog::replay_jsonl(&text);
        let mut file = OpenOptions::new().create(true).append(true).open(&path)?;
        if !text.is_empty() && !text.ends_with('\n') {
            file.write_all(b"\n")?;
            file.sync_data()?;
        }
        Ok((EventStore { file: Mutex::new(file), log: RwLock::new(log) }, corrupt.len()))
    }

    pub fn append(&self, event: EngagementEvent) -> io::Result<RecordOutcome> {
        let mut file = self.file.lock().unwrap();
        if self.log.read().unwrap().contains(&event.event_id) {
            return Ok(RecordOutcome::DuplicateIgnored);
        }
        let line = event.to_json_line() + "\n";
        file.write_all(line.as_bytes())?;
        file.sync_data()?;
        Ok(self.log.write().unwrap().record_event(event))
    }

    pub fn snapshot(&self) -> Vec<EngagementEvent> {
        self.log.read().unwrap().events().cloned().collect()
    }

    pub fn for_learner(&self, learner: &tutorflow_core::LearnerId) -> Vec<EngagementEvent> {
        self.log.read().unwrap().for_learner(learner).cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.log.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;
    use tutorflow_core::analytics::EngagementKind;
    use tutorflow_core::{EventId, LearnerId};

    #[test]
    fn roundtrip_and_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let x = json!({"a": [1, 2.5, "ü"], "b": null});
        let saved = store.store(EntityKind::Plan, "p1", x.clone(), 7).unwrap();
        assert_eq!(store.load(EntityKind::Plan, "p1").unwrap(), saved);
        assert_eq!(saved.payload, x);
        assert!(matches!(store.load(EntityKind::Plan, "nope"), Err(StoreError::NotFound(..))));
        assert!(matches!(store.store(EntityKind::Plan, "../evil", x, 0), Err(StoreError::InvalidId(_))));
    }

    #[test]
    fn truncated_record_is_isolated() {
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(Store::open(dir.path()).unwrap());
        store.store(EntityKind::Plan, "good", json!(1), 0).unwrap();
        store.store(EntityKind::Plan, "bad", json!({"long": "value"}), 0).unwrap();
        let path = dir.path().join("plans/bad.json");
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(store.load(EntityKind::Plan, "bad"), Err(StoreError::StorageCorrupt(id)) if id == "bad"));
        let (repo, corrupt) = Repo::<i64>::open(store, EntityKind::Plan).unwrap();
        assert_eq!(corrupt, ["bad"]);
        assert_eq!(repo.get("good"), Some(1));
    }

    fn ev(id: &str, at: i64) -> EngagementEvent {
        EngagementEvent::new(EventId::new(id), LearnerId::new("L1"), None, EngagementKind::StepEntered { step: 1 }, at)
    }

    #[test]
    fn event_log_survives_reopen_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        {
            let (events, _) = EventStore::open(dir.path()).unwrap();
            assert_eq!(events.append(ev("a", 1)).unwrap(), RecordOutcome::Accepted { late: false });
            assert_eq!(events.append(ev("a", 1)).unwrap(), RecordOutcome::DuplicateIgnored);
            events.append(ev("b", 2)).unwrap();
        }
        let path = dir.path().join(EventStore::FILE);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"schema_version\":1,\"event_id\":\"c\"").unwrap();
        drop(f);
        let (events, corrupt) = EventStore::open(dir.path()).unwrap();
        assert_eq!((events.len(), corrupt), (2, 1));
        events.append(ev("d", 3)).unwrap();
        let (events, corrupt) = EventStore::open(dir.path()).unwrap();
        assert_eq!((events.len(), corrupt), (3, 1));
    }
}
