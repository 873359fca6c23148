//! Raw-socket ML-KEM (FIPS 203) secret exchange between mesh peers.
//!
//! Each node runs a plain TCP listener on its configured PQC port. An
//! exchange is three frames on one connection: the initiator requests a
//! public key, the responder replies with a freshly generated one, and the
//! initiator returns the KEM ciphertext. Both ends then hold the same
//! 32-byte shared secret under the agreed `session_id`, retrievable exactly
//! once from their local [`SessionRegistry`]. A fresh key pair is generated
//! per exchange; nothing is ever reused.
//!
//! Confidentiality comes from the KEM itself and from the message layer
//! above; this socket carries no long-term secrets and runs without TLS.

pub mod frame;
mod params;
mod registry;
pub mod testing;

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;
use tokio::net::{TcpListener, TcpStream, ToSocketAddrs};
use tokio::task::JoinHandle;
use zeroize::Zeroizing;

pub use frame::{read_frame, write_frame, FrameKind, KemWireMessage, REQUEST_PUBLIC_KEY};
pub use params::KemParams;
pub use registry::{KemRole, SessionRegistry};

/// Shared secret size for every ML-KEM parameter set.
pub const SHARED_SECRET_LEN: usize = 32;

/// How long either side of an exchange waits for the peer's next frame.
pub const EXCHANGE_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Error)]
pub enum KemChannelError {
    #[error("failed to bind KEM listener: {0}")]
    Bind(std::io::Error),
    #[error("failed to connect to KEM peer: {0}")]
    Connect(std::io::Error),
    #[error("i/o error during KEM exchange: {0}")]
    Io(#[from] std::io::Error),
    #[error("KEM exchange timed out")]
    Timeout,
    #[error("protocol violation: {0}")]
    Protocol(String),
    /// The peer answered with a typed error frame.
    #[error("peer rejected exchange: {0}")]
    PeerError(String),
    #[error("peer sent an invalid public key")]
    InvalidPeerKey,
    #[error("session {0:?} already registered")]
    DuplicateSession(String),
    #[error("no secret stored for session {0:?}")]
    NotFound(String),
    #[error("secret for session {0:?} was already consumed")]
    AlreadyConsumed(String),
}

/// A running KEM listener. Dropping the handle stops the accept loop.
pub struct KemListenerHandle {
    local_addr: SocketAddr,
    task: JoinHandle<()>,
}

impl KemListenerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }
}

impl Drop for KemListenerHandle {
    fn drop(&mut self) {
        self.task.abort();
    }
}

/// Binds `listen` and serves inbound KEM exchanges concurrently, storing
/// each completed responder session in `registry`.
pub async fn serve_kem(
    listen: impl ToSocketAddrs,
    registry: Arc<SessionRegistry>,
    params: KemParams,
) -> Result<KemListenerHandle, KemChannelError> {
    let listener = TcpListener::bind(listen).await.map_err(KemChannelError::Bind)?;
    serve_kem_on(listener, registry, params)
}

/// Serves KEM exchanges on an already-bound listener.
pub fn serve_kem_on(
    listener: TcpListener,
    registry: Arc<SessionRegistry>,
    params: KemParams,
) -> Result<KemListenerHandle, KemChannelError> {
    let local_addr = listener.local_addr()?;
    let task = tokio::spawn(async move {
        loop {
            match listener.accept().await {
                Ok((stream, _peer)) => {
                    let registry = Arc::clone(&registry);
                    tokio::spawn(async move {
                        if let Err(err) = respond(stream, registry, params).await {
                            tracing::debug!("KEM exchange failed: {err}");
                        }
                    });
                }
                Err(err) => {
                    tracing::warn!("KEM accept failed: {err}");
                }
            }
        }
    });
    Ok(KemListenerHandle { local_addr, task })
}

async fn respond(
    mut stream: TcpStream,
    registry: Arc<SessionRegistry>,
    params: KemParams,
) -> Result<(), KemChannelError> {
    let request = frame::read_frame_timeout(&mut stream, EXCHANGE_TIMEOUT).await?;

    // The only acceptable opener is a well-formed public key request. A
    // ciphertext frame arriving first names a session this connection never
    // negotiated.
    match request.kind {
        FrameKind::PublicKeyRequest if request.payload == REQUEST_PUBLIC_KEY => {}
        FrameKind::Ciphertext => {
            return refuse(&mut stream, &request.session_id, "unknown session").await;
        }
        _ => {
            return refuse(&mut stream, &request.session_id, "bad request").await;
        }
    }
    let session_id = request.session_id;

    let (public_key, decap_key) = params.generate_keypair();
    frame::write_frame(
        &mut stream,
        &KemWireMessage {
            kind: FrameKind::PublicKeyReply,
            session_id: session_id.clone(),
            payload: public_key,
        },
    )
    .await?;

    let ct_frame = frame::read_frame_timeout(&mut stream, EXCHANGE_TIMEOUT).await?;
    if ct_frame.kind != FrameKind::Ciphertext {
        return refuse(&mut stream, &session_id, "bad request").await;
    }
    if ct_frame.session_id != session_id {
        return refuse(&mut stream, &ct_frame.session_id, "unknown session").await;
    }
    let Ok(secret) = decap_key.decapsulate(&ct_frame.payload) else {
        return refuse(&mut stream, &session_id, "invalid ciphertext").await;
    };

    if registry
        .insert(&session_id, secret, KemRole::Responder)
        .is_err()
    {
        return refuse(&mut stream, &session_id, "duplicate session").await;
    }
    Ok(())
}

async fn refuse(
    stream: &mut TcpStream,
    session_id: &str,
    reason: &str,
) -> Result<(), KemChannelError> {
    let _ = frame::write_frame(
        stream,
        &KemWireMessage {
            kind: FrameKind::Error,
            session_id: session_id.to_string(),
            payload: reason.as_bytes().to_vec(),
        },
    )
    .await;
    Err(KemChannelError::Protocol(reason.to_string()))
}

/// Runs the initiator side of an exchange against `peer`, stores the secret
/// in `registry` under `session_id`, and returns a copy of it.
pub async fn initiate_kem(
    peer: impl ToSocketAddrs,
    session_id: &str,
    registry: &SessionRegistry,
    params: KemParams,
) -> Result<Zeroizing<[u8; SHARED_SECRET_LEN]>, KemChannelError> {
    let mut stream = TcpStream::connect(peer).await.map_err(KemChannelError::Connect)?;

    frame::write_frame(
        &mut stream,
        &KemWireMessage {
            kind: FrameKind::PublicKeyRequest,
            session_id: session_id.to_string(),
            payload: REQUEST_PUBLIC_KEY.to_vec(),
        },
    )
    .await?;

    let reply = frame::read_frame_timeout(&mut stream, EXCHANGE_TIMEOUT).await?;
    match reply.kind {
        FrameKind::PublicKeyReply if reply.session_id == session_id => {}
        FrameKind::Error => {
            return Err(KemChannelError::PeerError(
                String::from_utf8_lossy(&reply.payload).into_owned(),
            ));
        }
        _ => {
            return Err(KemChannelError::Protocol(format!(
                "expected public key reply, got {:?}",
                reply.kind
            )));
        }
    }

    let (ciphertext, secret) = params.encapsulate(&reply.payload)?;
    frame::write_frame(
        &mut stream,
        &KemWireMessage {
            kind: FrameKind::Ciphertext,
            session_id: session_id.to_string(),
            payload: ciphertext,
        },
    )
    .await?;

    registry.insert(session_id, secret.clone(), KemRole::Initiator)?;
    Ok(secret)
}
