//! Binary framing for the KEM socket.
//!
//! Wire layout, all integers big-endian:
//!
//! ```text
//! u32  frame length L (bytes following this field)
//! u8   kind: 0x01 public_key_request, 0x02 public_key_reply,
//!            0x03 ciphertext,         0x04 error
//! u16  session id length S
//! [S]  session id, UTF-8
//! [..] payload (L - 3 - S bytes)
//! ```
//!
//! A request frame's payload is exactly the bytes of
//! [`REQUEST_PUBLIC_KEY`]; a reply carries the responder's public key; a
//! ciphertext frame carries the KEM ciphertext; an error frame carries a
//! UTF-8 reason.

use std::time::Duration;

use tokio::io::{AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt};

use crate::KemChannelError;

/// Payload of a public key request frame.
pub const REQUEST_PUBLIC_KEY: &[u8] = b"REQUEST_PUBLIC_KEY";

/// Upper bound on a frame body; the largest legitimate payload is an
/// ML-KEM-1024 public key (1568 bytes).
const MAX_FRAME_LEN: usize = 64 * 1024;
const MAX_SESSION_ID_LEN: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    PublicKeyRequest,
    PublicKeyReply,
    Ciphertext,
    Error,
}

impl FrameKind {
    fn to_byte(self) -> u8 {
        match self {
            FrameKind::PublicKeyRequest => 0x01,
            FrameKind::PublicKeyReply => 0x02,
            FrameKind::Ciphertext => 0x03,
            FrameKind::Error => 0x04,
        }
    }

    fn from_byte(byte: u8) -> Result<Self, KemChannelError> {
        match byte {
            0x01 => Ok(FrameKind::PublicKeyRequest),
            0x02 => Ok(FrameKind::PublicKeyReply),
            0x03 => Ok(FrameKind::Ciphertext),
            0x04 => Ok(FrameKind::Error),
            other => Err(KemChannelError::Protocol(format!(
                "unknown frame kind 0x{other:02x}"
            ))),
        }
    }
}

/// One message on the KEM socket.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KemWireMessage {
    pub kind: FrameKind,
    pub session_id: String,
    pub payload: Vec<u8>,
}

pub async fn write_frame<W: AsyncWrite + Unpin>(
    writer: &mut W,
    msg: &KemWireMessage,
) -> Result<(), KemChannelError> {
    let sid = msg.session_id.as_bytes();
    if sid.len() > MAX_SESSION_ID_LEN {
        return Err(KemChannelError::Protocol("session id too long".into()));
    }
    let len = 1 + 2 + sid.len() + msg.payload.len();
    if len > MAX_FRAME_LEN {
        return Err(KemChannelError::Protocol("frame too large".into()));
    }
    let mut buf = Vec::with_capacity(4 + len);
    buf.extend_from_slice(&(len as u32).to_be_bytes());
    buf.push(msg.kind.to_byte());
    buf.extend_from_slice(&(sid.len() as u16).to_be_bytes());
    buf.extend_from_slice(sid);
    buf.extend_from_slice(&msg.payload);
    writer.write_all(&buf).await?;
    writer.flush().await?;
    Ok(())
}

pub async fn read_frame<R: AsyncRead + Unpin>(
    reader: &mut R,
) -> Result<KemWireMessage, KemChannelError> {
    let mut len_buf = [0u8; 4];
    reader.read_exact(&mut len_buf).await?;
    let len = u32::from_be_bytes(len_buf) as usize;
    if len < 3 || len > MAX_FRAME_LEN {
        return Err(KemChannelError::Protocol(format!(
            "invalid frame length {len}"
        )));
    }
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body).await?;

    let kind = FrameKind::from_byte(body[0])?;
    let sid_len = u16::from_be_bytes([body[1], body[2]]) as usize;
    if sid_len > MAX_SESSION_ID_LEN || 3 + sid_len > len {
        return Err(KemChannelError::Protocol("invalid session id length".into()));
    }
    let session_id = String::from_utf8(body[3..3 + sid_len].to_vec())
        .map_err(|_| KemChannelError::Protocol("session id is not UTF-8".into()))?;
    let payload = body[3 + sid_len..].to_vec();
    Ok(KemWireMessage {
        kind,
        session_id,
        payload,
    })
}

pub async fn read_frame_timeout<R: AsyncRead + Unpin>(
    reader: &mut R,
    timeout: Duration,
) -> Result<KemWireMessage, KemChannelError> {
    tokio::time::timeout(timeout, read_frame(reader))
        .await
        .map_err(|_| KemChannelError::Timeout)?
}
