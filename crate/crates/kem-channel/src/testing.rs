//! Fault-injection helpers for integration tests: a frame-aware TCP proxy
//! that corrupts KEM ciphertexts in flight.

use std::net::SocketAddr;

use tokio::net::{TcpListener, TcpStream};
use tokio::task::JoinHandle;

use crate::frame::{read_frame, write_frame, FrameKind};

/// A man-in-the-middle proxy for the KEM socket. Frames pass through
/// unchanged except client-to-server ciphertext frames, whose first payload
/// byte is flipped. With ML-KEM's implicit rejection the two ends then hold
/// different secrets, which surfaces later as an authenticated-decryption
/// failure at the message layer.
pub struct TamperProxy {
    local_addr: SocketAddr,
    task: JoinHandle<()>,
}

impl TamperProxy {
    pub async fn spawn(upstream: SocketAddr) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0").await?;
        let local_addr = listener.local_addr()?;
        let task = tokio::spawn(async move {
            while let Ok((client, _)) = listener.accept().await {
                tokio::spawn(async move {
                    let _ = relay(client, upstream).await;
                });
            }
        });
        Ok(Self { local_addr, task })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }
}

impl Drop for TamperProxy {
    fn drop(&mut self) {
        self.task.abort();
    }
}

async fn relay(mut client: TcpStream, upstream: SocketAddr) -> std::io::Result<()> {
    let mut server = TcpStream::connect(upstream).await?;
    loop {
        tokio::select! {
            frame = read_frame(&mut client) => {
                let Ok(mut frame) = frame else { break };
                if frame.kind == FrameKind::Ciphertext && !frame.payload.is_empty() {
                    frame.payload[0] ^= 0x01;
                }
                if write_frame(&mut server, &frame).await.is_err() {
                    break;
                }
            }
            frame = read_frame(&mut server) => {
                let Ok(frame) = frame else { break };
                if write_frame(&mut client, &frame).await.is_err() {
                    break;
                }
            }
        }
    }
    Ok(())
}
