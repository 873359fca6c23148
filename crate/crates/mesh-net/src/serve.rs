//! Accept loop serving an axum router over plain TCP or mutually
//! authenticated TLS, injecting the caller's identity into each request.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::Router;
use hyper_util::rt::{TokioExecutor, TokioIo};
use hyper_util::server::conn::auto::Builder as ConnBuilder;
use hyper_util::service::TowerToHyperService;
use rustls::server::WebPkiClientVerifier;
use rustls::{RootCertStore, ServerConfig};
use sha2::{Digest, Sha256};
use tokio::io::{AsyncRead, AsyncWrite};
use tokio::net::TcpListener;
use tokio::task::JoinHandle;
use tokio_rustls::TlsAcceptor;

use crate::{init_crypto, NetError};

/// The authenticated identity of the calling process, resolved from its
/// client certificate fingerprint. `None` when the connection is plain HTTP
/// or the certificate is CA-valid but not one of the named identities.
#[derive(Debug, Clone)]
pub struct ClientIdentity(pub Option<String>);

/// Server-side TLS settings: the local CA, this process's certificate, and
/// the fingerprints of known client certificates.
#[derive(Clone)]
pub struct TlsServerConfig {
    pub ca_cert_pem: String,
    pub cert_pem: String,
    pub key_pem: String,
    /// fingerprint -> logical identity (e.g. an SAE id).
    pub client_names: HashMap<[u8; 32], String>,
}

/// A running HTTP(S) server; dropping the handle stops it.
pub struct ServerHandle {
    local_addr: SocketAddr,
    task: JoinHandle<()>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.task.abort();
    }
}

/// Serves `router` on an already-bound listener. With `tls` set, clients
/// must present a certificate signed by the configured CA; the mapped
/// identity is attached to every request as a [`ClientIdentity`] extension.
pub fn serve(
    listener: TcpListener,
    tls: Option<TlsServerConfig>,
    router: Router,
) -> Result<ServerHandle, NetError> {
    let local_addr = listener.local_addr().map_err(NetError::Bind)?;
    let acceptor = match tls {
        Some(config) => Some((build_acceptor(&config)?, Arc::new(config.client_names))),
        None => None,
    };

    let task = tokio::spawn(async move {
        loop {
            let (stream, _peer) = match listener.accept().await {
                Ok(accepted) => accepted,
                Err(err) => {
                    tracing::warn!("accept failed: {err}");
                    continue;
                }
            };
            let router = router.clone();
            match &acceptor {
                None => {
                    tokio::spawn(handle_connection(stream, router, ClientIdentity(None)));
                }
                Some((acceptor, names)) => {
                    let acceptor = acceptor.clone();
                    let names = Arc::clone(names);
                    tokio::spawn(async move {
                        match acceptor.accept(stream).await {
                            Ok(tls_stream) => {
                                let identity = peer_identity(&tls_stream, &names);
                                handle_connection(tls_stream, router, identity).await;
                            }
                            Err(err) => {
                                tracing::debug!("TLS handshake failed: {err}");
                            }
                        }
                    });
                }
            }
        }
    });
    Ok(ServerHandle { local_addr, task })
}

fn peer_identity(
    stream: &tokio_rustls::server::TlsStream<tokio::net::TcpStream>,
    names: &HashMap<[u8; 32], String>,
) -> ClientIdentity {
    let (_, connection) = stream.get_ref();
    let name = connection
        .peer_certificates()
        .and_then(|certs| certs.first())
        .and_then(|cert| {
            let fingerprint: [u8; 32] = Sha256::digest(cert.as_ref()).into();
            names.get(&fingerprint).cloned()
        });
    ClientIdentity(name)
}

async fn handle_connection<S>(stream: S, router: Router, identity: ClientIdentity)
where
    S: AsyncRead + AsyncWrite + Unpin + Send + 'static,
{
    let service = tower::service_fn(move |mut request: hyper::Request<hyper::body::Incoming>| {
        request.extensions_mut().insert(identity.clone());
        let router = router.clone();
        async move { tower::ServiceExt::oneshot(router, request).await }
    });
    if let Err(err) = ConnBuilder::new(TokioExecutor::new())
        .serve_connection_with_upgrades(TokioIo::new(stream), TowerToHyperService::new(service))
        .await
    {
        tracing::debug!("connection ended: {err}");
    }
}

fn build_acceptor(config: &TlsServerConfig) -> Result<TlsAcceptor, NetError> {
    init_crypto();

    let mut roots = RootCertStore::empty();
    for cert in rustls_pemfile::certs(&mut config.ca_cert_pem.as_bytes()) {
        let cert = cert.map_err(|e| NetError::Tls(format!("CA certificate: {e}")))?;
        roots
            .add(cert)
            .map_err(|e| NetError::Tls(format!("CA certificate: {e}")))?;
    }
    let verifier = WebPkiClientVerifier::builder(Arc::new(roots))
        .build()
        .map_err(|e| NetError::Tls(format!("client verifier: {e}")))?;

    let certs: Result<Vec<_>, _> = rustls_pemfile::certs(&mut config.cert_pem.as_bytes()).collect();
    let certs = certs.map_err(|e| NetError::Tls(format!("server certificate: {e}")))?;
    let key = rustls_pemfile::private_key(&mut config.key_pem.as_bytes())
        .map_err(|e| NetError::Tls(format!("server key: {e}")))?
        .ok_or_else(|| NetError::Tls("no private key in PEM".into()))?;

    let server_config = ServerConfig::builder()
        .with_client_cert_verifier(verifier)
        .with_single_cert(certs, key)
        .map_err(|e| NetError::Tls(e.to_string()))?;
    Ok(TlsAcceptor::from(Arc::new(server_config)))
}
