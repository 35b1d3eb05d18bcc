use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use uuid::Uuid;

use super::{Event, Request, Session, SessionConfig, SessionError, StateView};
use crate::imgp::ModelSnapshot;

pub const CONFIG_FILE: &str = "config.json";
pub const LOG_FILE: &str = "log.jsonl";

type Shared = Arc<Mutex<Session>>;

/// A set of sessions, optionally persisted under a root directory.
///
/// Each session lives in `<root>/<id>/` as `config.json` plus `log.jsonl`,
/// one accepted [`Request`] per line. Opening a store replays every log.
/// Calls on one session are serialized; different sessions run
/// independently.
#[derive(Debug, Default)]
pub struct SessionStore {
    root: Option<PathBuf>,
    sessions: RwLock<BTreeMap<String, Shared>>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SessionError + '_ {
    move |source| SessionError::Io {
        path: path.to_owned(),
        source,
    }
}

fn lock(session: &Shared) -> MutexGuard<'_, Session> {
    // a panic mid-call cannot leave a half-applied command: apply is atomic
    session.lock().unwrap_or_else(|e| e.into_inner())
}

impl SessionStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) a persistent store and replays every
    /// session found under `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, SessionError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        let mut sessions = BTreeMap::new();
        for entry in fs::read_dir(&root).map_err(io_err(&root))? {
            let dir = entry.map_err(io_err(&root))?.path();
            if !dir.join(CONFIG_FILE).is_file() {
                continue;
            }
            let id = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_owned();
            let session = load(&dir, &id)?;
            sessions.insert(id, Arc::new(Mutex::new(session)));
        }
        log::info!("opened {} session(s) from {}", sessions.len(), root.display());
        Ok(SessionStore {
            root: Some(root),
            sessions: RwLock::new(sessions),
        })
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn ids(&self) -> Vec<String> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .keys()
            .cloned()
            .collect()
    }

    pub fn create(&self, config: SessionConfig) -> Result<String, SessionError> {
        let id = Uuid::new_v4().to_string();
        let session = Session::new(id.clone(), config)?;
        if let Some(root) = &self.root {
            let dir = root.join(&id);
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            let path = dir.join(CONFIG_FILE);
            let text = serde_json::to_string_pretty(session.config()).expect("config serializes");
            fs::write(&path, text).map_err(io_err(&path))?;
            let path = dir.join(LOG_FILE);
            File::create(&path).map_err(io_err(&path))?;
        }
        self.sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(id)
    }

    fn get(&self, id: &str) -> Result<Shared, SessionError> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(id.to_owned()))
    }

    /// Applies `request` and appends it to the session log.
    ///
    /// If the log write fails the session is rebuilt from disk, so memory
    /// never runs ahead of the persisted state.
    pub fn apply(&self, id: &str, request: Request) -> Result<Event, SessionError> {
        let shared = self.get(id)?;
        let mut session = lock(&shared);
        if session.is_duplicate(&request) {
            return session.apply(request);
        }
        let event = session.apply(request.clone())?;
        if let Some(root) = &self.root {
            let dir = root.join(id);
            if let Err(e) = append(&dir.join(LOG_FILE), &request) {
                log::error!("session {id}: log append failed, reloading: {e}");
                *session = load(&dir, id)?;
                return Err(e);
            }
        }
        Ok(event)
    }

    pub fn state(&self, id: &str, grid: &[Vec<f64>]) -> Result<StateView, SessionError> {
        lock(&self.get(id)?).state(grid)
    }

    pub fn snapshot(&self, id: &str) -> Result<ModelSnapshot, SessionError> {
        Ok(lock(&self.get(id)?).snapshot())
    }

    /// Runs `f` on the session under its lock.
    pub fn with_session<T>(&self, id: &str, f: impl FnOnce(&Session) -> T) -> Result<T, SessionError> {
        Ok(f(&lock(&self.get(id)?)))
    }
}

fn append(path: &Path, request: &Request) -> Result<(), SessionError> {
    let mut line = serde_json::to_vec(request).expect("requests serialize");
    line.push(b'\n');
    let mut file = OpenOptions::new().append(true).open(path).map_err(io_err(path))?;
    file.write_all(&line).map_err(io_err(path))?;
    file.sync_data().map_err(io_err(path))
}

/// Reads `config.json` and `log.jsonl` from `dir` and replays them.
pub(crate) fn load(dir: &Path, id: &str) -> Result<Session, SessionError> {
    let path = dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let config: SessionConfig = serde_json::from_str(&text).map_err(|e| SessionError::Corrupt {
        path: path.clone(),
        message: e.to_string(),
    })?;
    let path = dir.join(LOG_FILE);
    let mut commands = Vec::new();
    if path.exists() {
        let file = File::open(&path).map_err(io_err(&path))?;
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_err(&path))?;
            if line.trim().is_empty() {
                continue;
            }
            let request: Request = serde_json::from_str(&line).map_err(|e| SessionError::Corrupt {
                path: path.clone(),
                message: format!("line {}: {e}", n + 1),
            })?;
            commands.push(request);
        }
    }
    Session::replay(id, config, &commands)
}
