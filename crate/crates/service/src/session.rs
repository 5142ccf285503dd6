//! In-memory sessions, idle expiry and the append-only snapshot directory.

use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use base64::Engine as _;
use chrono::{DateTime, Duration, Utc};
use maxproto_core::agents::{PartialPrototype, ThemeDescription, ThemeOutcome};
use maxproto_core::model::{parse_wireframe_value, GenerationRequest, Prototype, Raster, ThemeProvenance};
use maxproto_core::render::{parse_document, render_document};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const SNAPSHOT_FORMAT: &str = "maxproto.session/v1";

/// 128 random bits, base64url without padding (22 characters).
pub fn new_session_id() -> String {
    let mut bytes = [0u8; 16];
    rand::thread_rng().fill_bytes(&mut bytes);
    base64::engine::general_purpose::URL_SAFE_NO_PAD.encode(bytes)
}

/// One immutable revision of a session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionData {
    pub id: String,
    pub request: GenerationRequest,
    pub theme: ThemeOutcome,
    pub prototype: Option<Prototype>,
    pub revision: u64,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl SessionData {
    /// Next revision with `prototype` installed.
    pub fn with_prototype(&self, prototype: Prototype, now: DateTime<Utc>) -> Self {
        Self { prototype: Some(prototype), revision: self.revision + 1, updated_at: now, ..self.clone() }
    }
}

/// A session slot. Mutations hold `writer` for their whole duration
/// (it also carries a partial pass awaiting resumption); readers clone
/// the current revision and never wait on a mutation.
#[derive(Debug)]
pub struct SessionSlot {
    pub writer: tokio::sync::Mutex<Option<PartialPrototype>>,
    current: RwLock<Arc<SessionData>>,
    last_seen: Mutex<DateTime<Utc>>,
}

impl SessionSlot {
    fn new(data: SessionData, now: DateTime<Utc>) -> Self {
        Self {
            writer: tokio::sync::Mutex::new(None),
            current: RwLock::new(Arc::new(data)),
            last_seen: Mutex::new(now),
        }
    }

    pub fn current(&self) -> Arc<SessionData> {
        self.current.read().expect("session lock poisoned").clone()
    }

    /// Installs a new revision. Callers must hold `writer`.
    pub fn commit(&self, data: SessionData) {
        *self.current.write().expect("session lock poisoned") = Arc::new(data);
    }

    fn touch(&self, now: DateTime<Utc>) {
        *self.last_seen.lock().expect("session lock poisoned") = now;
    }

    fn idle_since(&self) -> DateTime<Utc> {
        *self.last_seen.lock().expect("session lock poisoned")
    }
}

#[derive(Debug)]
pub struct SessionStore {
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
    ttl: Duration,
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        Self { sessions: RwLock::new(HashMap::new()), ttl }
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }

    fn expired(&self, slot: &SessionSlot, now: DateTime<Utc>) -> bool {
        now - slot.idle_since() > self.ttl
    }

    /// Looks up a live session and refreshes its idle timer. Expired
    /// sessions are dropped.
    pub fn get(&self, id: &str, now: DateTime<Utc>) -> Option<Arc<SessionSlot>> {
        let slot = self.sessions.read().expect("store lock poisoned").get(id).cloned()?;
        if self.expired(&slot, now) {
            self.sessions.write().expect("store lock poisoned").remove(id);
            tracing::info!(session = id, "session expired");
            return None;
        }
        slot.touch(now);
        Some(slot)
    }

    pub fn insert(&self, data: SessionData, now: DateTime<Utc>) -> Arc<SessionSlot> {
        let id = data.id.clone();
        let slot = Arc::new(SessionSlot::new(data, now));
        self.sessions.write().expect("store lock poisoned").insert(id, slot.clone());
        slot
    }

    /// Drops every expired session; returns how many were removed.
    pub fn sweep(&self, now: DateTime<Utc>) -> usize {
        let mut map = self.sessions.write().expect("store lock poisoned");
        let before = map.len();
        map.retain(|_, slot| !self.expired(slot, now));
        before - map.len()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("store lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot I/O on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("snapshot {path} already exists")]
    Exists { path: PathBuf },
    #[error("corrupt snapshot {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotDoc {
    format: String,
    session_id: String,
    revision: u64,
    created_at: DateTime<Utc>,
    updated_at: DateTime<Utc>,
    prompt: String,
    seed: Option<u64>,
    wireframe: Value,
    theme: ThemeDescription,
    theme_image_png: String,
    theme_provenance: ThemeProvenance,
    prototype: Option<Value>,
}

pub fn snapshot_path(dir: &Path, id: &str, revision: u64) -> PathBuf {
    dir.join(id).join(format!("rev-{revision}.json"))
}

fn encode_snapshot(data: &SessionData) -> Result<String, String> {
    let png = data.theme.theme_image.to_png().map_err(|e| e.to_string())?;
    let prototype = match &data.prototype {
        Some(p) => {
            let rendered = render_document(p, true).map_err(|e| e.to_string())?;
            Some(serde_json::from_str::<Value>(&rendered.text).map_err(|e| e.to_string())?)
        }
        None => None,
    };
    let doc = SnapshotDoc {
        format: SNAPSHOT_FORMAT.to_string(),
        session_id: data.id.clone(),
        revision: data.revision,
        created_at: data.created_at,
        updated_at: data.updated_at,
        prompt: data.request.prompt.clone(),
        seed: data.request.seed,
        wireframe: data.request.wireframe.to_document(),
        theme: data.theme.theme.clone(),
        theme_image_png: base64::engine::general_purpose::STANDARD.encode(png),
        theme_provenance: data.theme.provenance.clone(),
        prototype,
    };
    Ok(serde_json::to_string_pretty(&doc).expect("snapshot serializes") + "\n")
}

/// Writes `<dir>/<id>/rev-<n>.json`. Existing files are never overwritten.
pub fn write_snapshot(dir: &Path, data: &SessionData) -> Result<PathBuf, SnapshotError> {
    let path = snapshot_path(dir, &data.id, data.revision);
    let text = encode_snapshot(data).map_err(|message| SnapshotError::Corrupt { path: path.clone(), message })?;
    let parent = path.parent().expect("snapshot path has a parent");
    fs::create_dir_all(parent).map_err(|source| SnapshotError::Io { path: parent.to_path_buf(), source })?;
    let mut f = fs::OpenOptions::new().write(true).create_new(true).open(&path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::AlreadyExists {
            SnapshotError::Exists { path: path.clone() }
        } else {
            SnapshotError::Io { path: path.clone(), source }
        }
    })?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.sync_all())
        .map_err(|source| SnapshotError::Io { path: path.clone(), source })?;
    Ok(path)
}

pub fn read_snapshot(path: &Path) -> Result<SessionData, SnapshotError> {
    let corrupt = |message: String| SnapshotError::Corrupt { path: path.to_path_buf(), message };
    let text = fs::read_to_string(path).map_err(|source| SnapshotError::Io { path: path.to_path_buf(), source })?;
    let doc: SnapshotDoc = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
    if doc.format != SNAPSHOT_FORMAT {
        return Err(corrupt(format!("unsupported format {:?}", doc.format)));
    }
    let wireframe = parse_wireframe_value(doc.wireframe).map_err(|e| corrupt(e.to_string()))?;
    let request = GenerationRequest::new(doc.prompt, wireframe, doc.seed).map_err(|e| corrupt(e.to_string()))?;
    let png = base64::engine::general_purpose::STANDARD
        .decode(doc.theme_image_png.as_bytes())
        .map_err(|e| corrupt(e.to_string()))?;
    let theme_image = Raster::decode(&png).map_err(|e| corrupt(e.to_string()))?;
    let prototype = match doc.prototype {
        Some(v) => Some(parse_document(&v.to_string(), None).map_err(|e| corrupt(e.to_string()))?),
        None => None,
    };
    Ok(SessionData {
        id: doc.session_id,
        request,
        theme: ThemeOutcome { theme: doc.theme, theme_image, provenance: doc.theme_provenance },
        prototype,
        revision: doc.revision,
        created_at: doc.created_at,
        updated_at: doc.updated_at,
    })
}

fn revision_of(name: &str) -> Option<u64> {
    name.strip_prefix("rev-")?.strip_suffix(".json")?.parse().ok()
}

/// Latest revision of every session under `dir`. A missing directory
/// holds no sessions.
pub fn load_snapshots(dir: &Path) -> Result<Vec<SessionData>, SnapshotError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SnapshotError::Io { path, source }
    };
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut entries = fs::read_dir(dir).map_err(io(dir))?.collect::<Result<Vec<_>, _>>().map_err(io(dir))?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let sub = entry.path();
        if !sub.is_dir() {
            continue;
        }
        let latest = fs::read_dir(&sub)
            .map_err(io(&sub))?
            .filter_map(|e| e.ok())
            .filter_map(|e| revision_of(&e.file_name().to_string_lossy()).map(|r| (r, e.path())))
            .max_by_key(|(r, _)| *r);
        if let Some((_, path)) = latest {
            out.push(read_snapshot(&path)?);
        }
    }
    Ok(out)
}

/// Installs restored sessions, resetting their idle timers to `now`.
pub fn restore(store: &SessionStore, sessions: Vec<SessionData>, now: DateTime<Utc>) {
    for s in sessions {
        store.insert(s, now);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use maxproto_core::demo;

    fn session(engine: &maxproto_core::agents::Engine) -> SessionData {
        let req = GenerationRequest::new(demo::PROMPT, demo::wireframe(), Some(3)).unwrap();
        let theme = engine.generate_theme(&req).unwrap();
        let now = Utc::now();
        SessionData {
            id: new_session_id(),
            request: req,
            theme,
            prototype: None,
            revision: 1,
            created_at: now,
            updated_at: now,
        }
    }

    #[test]
    fn ids_are_url_safe_128_bit() {
        let id = new_session_id();
        assert_eq!(id.len(), 22);
        assert!(id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_'));
        let raw = base64::engine::general_purpose::URL_SAFE_NO_PAD.decode(&id).unwrap();
        assert_eq!(raw.len(), 16);
        assert_ne!(id, new_session_id());
    }

    #[test]
    fn idle_sessions_expire() {
        let engine = demo::mock_engine();
        let store = SessionStore::new(Duration::hours(24));
        let t0 = Utc::now();
        let id = store.insert(session(&engine), t0).current().id.clone();
        assert!(store.get(&id, t0 + Duration::hours(23)).is_some());
        // the lookup above refreshed the timer
        assert!(store.get(&id, t0 + Duration::hours(46)).is_some());
        assert!(store.get(&id, t0 + Duration::hours(71)).is_none());
        assert!(store.is_empty());
    }

    #[test]
    fn sweep_drops_only_expired() {
        let engine = demo::mock_engine();
        let store = SessionStore::new(Duration::minutes(10));
        let t0 = Utc::now();
        store.insert(session(&engine), t0);
        store.insert(session(&engine), t0 + Duration::minutes(8));
        assert_eq!(store.sweep(t0 + Duration::minutes(12)), 1);
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn snapshot_round_trip_and_append_only() {
        let engine = demo::mock_engine();
        let dir = tempfile::tempdir().unwrap();
        let s1 = session(&engine);
        write_snapshot(dir.path(), &s1).unwrap();
        let proto = engine.generate_components(&s1.request, s1.theme.clone()).unwrap();
        let s2 = s1.with_prototype(proto, Utc::now());
        let p2 = write_snapshot(dir.path(), &s2).unwrap();
        assert_eq!(p2, snapshot_path(dir.path(), &s1.id, 2));
        assert!(matches!(write_snapshot(dir.path(), &s2), Err(SnapshotError::Exists { .. })));

        let loaded = load_snapshots(dir.path()).unwrap();
        assert_eq!(loaded, vec![s2]);
        assert!(load_snapshots(&dir.path().join("missing")).unwrap().is_empty());
    }
}
