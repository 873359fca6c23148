//! Consume-once registry of KEM session secrets.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use zeroize::Zeroizing;

use crate::{KemChannelError, SHARED_SECRET_LEN};

/// Default lifetime of an unconsumed session.
pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(300);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KemRole {
    Initiator,
    Responder,
}

struct KemSession {
    // None once consumed; the secret is zeroized on drop.
    secret: Option<Zeroizing<[u8; SHARED_SECRET_LEN]>>,
    role: KemRole,
    created_at: Instant,
}

/// Synchronized map of per-session shared secrets with atomic
/// consume-on-read semantics. Unconsumed sessions expire after the TTL;
/// consumed sessions leave a tombstone until the TTL passes so that a second
/// lookup is distinguishable from an unknown session.
pub struct SessionRegistry {
    inner: Mutex<HashMap<String, KemSession>>,
    ttl: Duration,
}

impl Default for SessionRegistry {
    fn default() -> Self {
        Self::new(DEFAULT_SESSION_TTL)
    }
}

impl SessionRegistry {
    pub fn new(ttl: Duration) -> Self {
        Self {
            inner: Mutex::new(HashMap::new()),
            ttl,
        }
    }

    pub fn insert(
        &self,
        session_id: &str,
        secret: Zeroizing<[u8; SHARED_SECRET_LEN]>,
        role: KemRole,
    ) -> Result<(), KemChannelError> {
        let mut map = self.inner.lock().expect("registry lock");
        Self::sweep(&mut map, self.ttl);
        if map.contains_key(session_id) {
            return Err(KemChannelError::DuplicateSession(session_id.to_string()));
        }
        map.insert(
            session_id.to_string(),
            KemSession {
                secret: Some(secret),
                role,
                created_at: Instant::now(),
            },
        );
        Ok(())
    }

    /// Returns the stored secret and marks the session consumed. Succeeds at
    /// most once per session.
    pub fn lookup_secret(
        &self,
        session_id: &str,
    ) -> Result<Zeroizing<[u8; SHARED_SECRET_LEN]>, KemChannelError> {
        let mut map = self.inner.lock().expect("registry lock");
        Self::sweep(&mut map, self.ttl);
        let session = map
            .get_mut(session_id)
            .ok_or_else(|| KemChannelError::NotFound(session_id.to_string()))?;
        session
            .secret
            .take()
            .ok_or_else(|| KemChannelError::AlreadyConsumed(session_id.to_string()))
    }

    pub fn role(&self, session_id: &str) -> Option<KemRole> {
        let map = self.inner.lock().expect("registry lock");
        map.get(session_id).map(|s| s.role)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("registry lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn sweep(map: &mut HashMap<String, KemSession>, ttl: Duration) {
        let now = Instant::now();
        map.retain(|_, session| now.duration_since(session.created_at) < ttl);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn secret(byte: u8) -> Zeroizing<[u8; SHARED_SECRET_LEN]> {
        Zeroizing::new([byte; SHARED_SECRET_LEN])
    }

    #[test]
    fn lookup_consumes_exactly_once() {
        let registry = SessionRegistry::default();
        registry.insert("s1", secret(1), KemRole::Responder).unwrap();

        assert_eq!(*registry.lookup_secret("s1").unwrap(), [1u8; 32]);
        assert!(matches!(
            registry.lookup_secret("s1"),
            Err(KemChannelError::AlreadyConsumed(_))
        ));
    }

    #[test]
    fn unknown_session_is_not_found() {
        let registry = SessionRegistry::default();
        assert!(matches!(
            registry.lookup_secret("missing"),
            Err(KemChannelError::NotFound(_))
        ));
    }

    #[test]
    fn duplicate_insert_rejected() {
        let registry = SessionRegistry::default();
        registry.insert("s1", secret(1), KemRole::Initiator).unwrap();
        assert!(matches!(
            registry.insert("s1", secret(2), KemRole::Initiator),
            Err(KemChannelError::DuplicateSession(_))
        ));
    }

    #[test]
    fn expired_sessions_are_evicted() {
        let registry = SessionRegistry::new(Duration::from_millis(0));
        registry.insert("s1", secret(1), KemRole::Initiator).unwrap();
        std::thread::sleep(Duration::from_millis(2));
        assert!(matches!(
            registry.lookup_secret("s1"),
            Err(KemChannelError::NotFound(_))
        ));
    }
}
