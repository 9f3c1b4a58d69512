//! In-memory session registry with idle expiry.
//!
//! Each session sits behind its own mutex, so advances of one session are
//! serialized while different sessions proceed in parallel. Snapshots take
//! the same lock and therefore only ever observe a phase boundary.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use tod_core::{Engine, Session, TurnResult};

use crate::data::Dictionaries;

/// Client-visible session header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiSession {
    pub session_id: String,
    pub domain: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub last_turn: TurnResult,
}

pub struct Entry {
    pub header: ApiSession,
    pub session: Session,
    last_active: Instant,
}

impl Entry {
    pub fn touch(&mut self) {
        self.last_active = Instant::now();
    }
}

pub type SharedEntry = Arc<Mutex<Entry>>;

pub struct SessionStore {
    dictionaries: Dictionaries,
    engine: Engine,
    idle_timeout: Duration,
    sessions: Mutex<HashMap<String, SharedEntry>>,
}

pub fn lock(entry: &SharedEntry) -> MutexGuard<'_, Entry> {
    // A panic inside an advance leaves the session rolled back or untouched.
    entry.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

impl SessionStore {
    pub fn new(dictionaries: Dictionaries, engine: Engine, idle_timeout: Duration) -> Self {
        Self {
            dictionaries,
            engine,
            idle_timeout,
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn dictionaries(&self) -> &Dictionaries {
        &self.dictionaries
    }

    pub fn idle_timeout(&self) -> Duration {
        self.idle_timeout
    }

    fn map(&self) -> MutexGuard<'_, HashMap<String, SharedEntry>> {
        self.sessions.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Starts a session; `None` when the domain is not loaded.
    pub fn create(&self, domain: &str) -> Option<ApiSession> {
        let dict = self.dictionaries.get(domain)?.clone();
        let id = uuid::Uuid::new_v4().to_string();
        let session = Session::new(id.clone(), dict, self.engine.clone());
        let header = ApiSession {
            session_id: id.clone(),
            domain: domain.to_string(),
            created_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            last_turn: session.start(),
        };
        let entry = Entry {
            header: header.clone(),
            session,
            last_active: Instant::now(),
        };
        self.map().insert(id, Arc::new(Mutex::new(entry)));
        Some(header)
    }

    /// Looks a session up. Expired sessions are dropped and reported missing.
    pub fn get(&self, id: &str) -> Option<SharedEntry> {
        let entry = self.map().get(id).cloned()?;
        let expired = entry
            .try_lock()
            .map(|e| e.last_active.elapsed() > self.idle_timeout)
            .unwrap_or(false);
        if expired {
            self.map().remove(id);
            return None;
        }
        Some(entry)
    }

    pub fn remove(&self, id: &str) -> bool {
        self.map().remove(id).is_some()
    }

    pub fn len(&self) -> usize {
        self.map().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops sessions idle for longer than the timeout; returns how many.
    /// Sessions busy with an advance are never idle.
    pub fn sweep(&self) -> usize {
        let mut map = self.map();
        let before = map.len();
        map.retain(|_, entry| match entry.try_lock() {
            Ok(e) => e.last_active.elapsed() <= self.idle_timeout,
            Err(_) => true,
        });
        before - map.len()
    }
}
