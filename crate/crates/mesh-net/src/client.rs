//! HTTP client construction matching the mesh's serving modes.

use std::time::Duration;

use crate::{init_crypto, NetError};

const CONNECT_TIMEOUT: Duration = Duration::from_secs(5);

/// Plain-HTTP client for insecure simulation mode.
pub fn plain_client() -> Result<reqwest::Client, NetError> {
    reqwest::Client::builder()
        .connect_timeout(CONNECT_TIMEOUT)
        .no_proxy()
        .build()
        .map_err(|e| NetError::Client(e.to_string()))
}

/// Mutually-authenticated TLS client: trusts only the deployment CA and
/// presents the given certificate.
pub fn mtls_client(
    ca_cert_pem: &str,
    cert_pem: &str,
    key_pem: &str,
) -> Result<reqwest::Client, NetError> {
    init_crypto();
    let ca = reqwest::Certificate::from_pem(ca_cert_pem.as_bytes())
        .map_err(|e| NetError::Client(format!("CA certificate: {e}")))?;
    let identity = reqwest::Identity::from_pem(format!("{cert_pem}{key_pem}").as_bytes())
        .map_err(|e| NetError::Client(format!("client identity: {e}")))?;
    reqwest::Client::builder()
        .connect_timeout(CONNECT_TIMEOUT)
        .no_proxy()
        .tls_certs_only([ca])
        .identity(identity)
        .build()
        .map_err(|e| NetError::Client(e.to_string()))
}
