use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use tokio::sync::{broadcast, Mutex, RwLock};

use crate::error::ServiceError;
use crate::session::{ActRequest, CreateSession, Session, SessionFile, StateView, StepDelta};

const STREAM_CAPACITY: usize = 256;

struct Entry {
    session: Session,
    updates: broadcast::Sender<Arc<str>>,
}

/// All live sessions. Requests on one session are serialized by its lock.
#[derive(Clone, Default)]
pub struct SessionStore {
    sessions: Arc<RwLock<HashMap<String, Arc<Mutex<Entry>>>>>,
    data_dir: Option<PathBuf>,
}

impl SessionStore {
    /// An in-memory store.
    pub fn new() -> Self {
        Self::default()
    }

    /// A store persisting every session under `dir`, resuming any sessions
    /// already saved there.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        let mut sessions = HashMap::new();
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let text = std::fs::read_to_string(&path)?;
            let file: SessionFile =
                serde_json::from_str(&text).map_err(|e| ServiceError::Internal(format!("{}: {e}", path.display())))?;
            let session = Session::from_file(file)?;
            let (updates, _) = broadcast::channel(STREAM_CAPACITY);
            sessions.insert(
                session.id().to_string(),
                Arc::new(Mutex::new(Entry { session, updates })),
            );
        }
        Ok(SessionStore {
            sessions: Arc::new(RwLock::new(sessions)),
            data_dir: Some(dir),
        })
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.data_dir.as_deref()
    }

    pub fn session_path(&self, id: &str) -> Option<PathBuf> {
        self.data_dir.as_ref().map(|d| d.join(format!("{id}.json")))
    }

    fn persist(&self, session: &Session) -> Result<(), ServiceError> {
        let Some(path) = self.session_path(session.id()) else {
            return Ok(());
        };
        let text = serde_json::to_string(&session.to_file()).map_err(|e| ServiceError::Internal(e.to_string()))?;
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text)?;
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }

    async fn entry(&self, id: &str) -> Result<Arc<Mutex<Entry>>, ServiceError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    pub async fn create(&self, request: CreateSession) -> Result<StateView, ServiceError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session::create(id.clone(), &request)?;
        self.persist(&session)?;
        let view = session.view();
        let (updates, _) = broadcast::channel(STREAM_CAPACITY);
        self.sessions
            .write()
            .await
            .insert(id, Arc::new(Mutex::new(Entry { session, updates })));
        Ok(view)
    }

    pub async fn state(&self, id: &str) -> Result<StateView, ServiceError> {
        Ok(self.entry(id).await?.lock().await.session.view())
    }

    pub async fn act(&self, id: &str, request: ActRequest) -> Result<StepDelta, ServiceError> {
        let entry = self.entry(id).await?;
        let mut guard = entry.lock().await;
        let mut next = guard.session.clone();
        let delta = next.act(request)?;
        self.persist(&next)?;
        guard.session = next;
        if let Ok(text) = serde_json::to_string(&StreamMessage::Step(&delta)) {
            // No subscribers is fine.
            let _ = guard.updates.send(text.into());
        }
        Ok(delta)
    }

    pub async fn history_csv(&self, id: &str) -> Result<String, ServiceError> {
        self.entry(id).await?.lock().await.session.history_csv()
    }

    /// Current state plus a receiver for every later step.
    pub async fn subscribe(&self, id: &str) -> Result<(StateView, broadcast::Receiver<Arc<str>>), ServiceError> {
        let entry = self.entry(id).await?;
        let guard = entry.lock().await;
        Ok((guard.session.view(), guard.updates.subscribe()))
    }

    pub async fn with_session<T>(&self, id: &str, f: impl FnOnce(&Session) -> T) -> Result<T, ServiceError> {
        Ok(f(&self.entry(id).await?.lock().await.session))
    }
}

/// Messages sent over `/sessions/{id}/stream`.
#[derive(serde::Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamMessage<'a> {
    State(&'a StateView),
    Step(&'a StepDelta),
}
