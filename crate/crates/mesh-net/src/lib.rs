//! Shared network plumbing for the mesh: a generated development CA,
//! mutually-authenticated TLS serving with client identification, and
//! matching HTTP clients.
//!
//! Client identity is established by certificate fingerprint: the server
//! knows the SHA-256 fingerprints of the certificates it issued (or was
//! configured with) and maps the presented client certificate to a logical
//! name, which handlers read from the [`ClientIdentity`] request extension.

pub mod client;
pub mod pki;
pub mod serve;

use std::sync::Once;

use thiserror::Error;

pub use client::{mtls_client, plain_client};
pub use pki::{fingerprint_cert_pem, CertMaterial, DevPki};
pub use serve::{serve, ClientIdentity, ServerHandle, TlsServerConfig};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("PKI error: {0}")]
    Pki(String),
    #[error("TLS configuration error: {0}")]
    Tls(String),
    #[error("failed to bind listener: {0}")]
    Bind(std::io::Error),
    #[error("HTTP client construction failed: {0}")]
    Client(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

static CRYPTO_INIT: Once = Once::new();

/// Installs the process-level rustls crypto provider. Idempotent; called by
/// every constructor in this crate that touches TLS.
pub fn init_crypto() {
    CRYPTO_INIT.call_once(|| {
        let _ = rustls::crypto::ring::default_provider().install_default();
    });
}
