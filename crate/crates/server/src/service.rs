//! Session store and turn execution.
//!
//! Each session sits behind its own fair async mutex, so concurrent posts to
//! one session run one at a time in the order they arrived while different
//! sessions proceed in parallel. Turns run on the blocking pool because a
//! parser backend may make network calls.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use concierge_core::dialog::AgentAction;
use concierge_core::parse::ParseError;
use concierge_core::session::{Engine, Session, StateSnapshot, TranscriptEntry, TurnError};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Mutex;
use tracing::{info, warn};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("service not ready: no knowledgebase loaded")]
    NotReady,
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error(transparent)]
    Rejected(#[from] ParseError),
    #[error("turn failed: {0}")]
    Internal(String),
}

impl From<TurnError> for ServiceError {
    fn from(e: TurnError) -> Self {
        match e {
            TurnError::Rejected(p) => ServiceError::Rejected(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    /// Milliseconds since the Unix epoch.
    pub created_ms: u64,
    pub updated_ms: u64,
    pub session: Session,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CreatedSession {
    pub id: String,
    pub greeting: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MessageReply {
    pub reply: String,
    pub action: AgentAction,
    /// 1-based position of this turn within the session.
    pub turn: u64,
    /// The parser backend failed and the turn was treated as irrelevant.
    pub degraded: bool,
    pub state: StateSnapshot,
}

type Cell = Arc<Mutex<SessionRecord>>;

pub struct ChatService {
    engine: Option<Arc<Engine>>,
    sessions: RwLock<HashMap<String, Cell>>,
    store: Option<PathBuf>,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn record_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.json"))
}

/// Writes via a temporary file so a crash never leaves half a record.
fn save(dir: &Path, record: &SessionRecord) {
    let path = record_path(dir, &record.id);
    let tmp = path.with_extension("json.tmp");
    let result = serde_json::to_vec_pretty(record)
        .map_err(std::io::Error::other)
        .and_then(|bytes| std::fs::write(&tmp, bytes))
        .and_then(|()| std::fs::rename(&tmp, &path));
    if let Err(e) = result {
        warn!(session = %record.id, error = %e, "could not persist session");
    }
}

impl ChatService {
    pub fn new(engine: Engine) -> Self {
        ChatService { engine: Some(Arc::new(engine)), sessions: RwLock::default(), store: None }
    }

    /// A service without a knowledgebase; every session operation fails
    /// with [`ServiceError::NotReady`].
    pub fn not_ready() -> Self {
        ChatService { engine: None, sessions: RwLock::default(), store: None }
    }

    /// Persists every session as `<dir>/<id>.json` and reloads the ones
    /// already there. Unreadable files are skipped with a warning.
    pub fn with_store(mut self, dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        let mut loaded = 0;
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            let record = std::fs::read_to_string(&path)
                .map_err(|e| e.to_string())
                .and_then(|text| serde_json::from_str::<SessionRecord>(&text).map_err(|e| e.to_string()));
            match record {
                Ok(record) => {
                    self.sessions_mut().insert(record.id.clone(), Arc::new(Mutex::new(record)));
                    loaded += 1;
                }
                Err(e) => warn!(file = %path.display(), error = %e, "skipping unreadable session file"),
            }
        }
        info!(dir = %dir.display(), loaded, "session store ready");
        self.store = Some(dir);
        Ok(self)
    }

    pub fn is_ready(&self) -> bool {
        self.engine.is_some()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().expect("session map poisoned").len()
    }

    fn sessions_mut(&self) -> std::sync::RwLockWriteGuard<'_, HashMap<String, Cell>> {
        self.sessions.write().expect("session map poisoned")
    }

    fn engine(&self) -> Result<&Arc<Engine>, ServiceError> {
        self.engine.as_ref().ok_or(ServiceError::NotReady)
    }

    fn cell(&self, id: &str) -> Result<Cell, ServiceError> {
        self.engine()?;
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    pub fn create_session(&self) -> Result<CreatedSession, ServiceError> {
        let engine = self.engine()?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = engine.new_session();
        let greeting = session.transcript.last().map(|e| e.text.clone()).unwrap_or_default();
        let now = now_ms();
        let record = SessionRecord { id: id.clone(), created_ms: now, updated_ms: now, session };
        if let Some(dir) = &self.store {
            save(dir, &record);
        }
        self.sessions_mut().insert(id.clone(), Arc::new(Mutex::new(record)));
        Ok(CreatedSession { id, greeting })
    }

    /// Runs one turn. Waits behind any turn already queued for the session.
    pub async fn post_message(&self, id: &str, text: &str) -> Result<MessageReply, ServiceError> {
        let engine = Arc::clone(self.engine()?);
        let mut guard = self.cell(id)?.lock_owned().await;
        let store = self.store.clone();
        let text = text.to_string();
        tokio::task::spawn_blocking(move || {
            let record = &mut *guard;
            let out = engine.turn(&mut record.session, &text)?;
            record.updated_ms = now_ms();
            if let Some(dir) = &store {
                save(dir, record);
            }
            Ok(MessageReply {
                reply: out.reply,
                action: out.action,
                turn: record.session.turns,
                degraded: out.parse.degraded,
                state: out.state,
            })
        })
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
    }

    pub async fn get_state(&self, id: &str) -> Result<StateSnapshot, ServiceError> {
        Ok(self.cell(id)?.lock().await.session.snapshot())
    }

    pub async fn transcript(&self, id: &str) -> Result<Vec<TranscriptEntry>, ServiceError> {
        Ok(self.cell(id)?.lock().await.session.transcript.clone())
    }
}
