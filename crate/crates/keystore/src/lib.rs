//! Durable, encrypted storage for relayed keys and local secrets.
//!
//! Three artifacts live in a node's state directory:
//!
//! - `seal.blob` — the store master secret, wrapped by a key derived from a
//!   device-bound secret (an emulated TPM: a random secret kept outside the
//!   state directory). Copying the state directory to a machine with a
//!   different device secret makes it undecryptable.
//! - `secrets.dat` — named secrets (the store password, the field-encryption
//!   secret), each entry stored as a random IV plus a chained-XOR ciphertext
//!   under the master secret so equal values never produce equal entries.
//! - `keystore.db` — the key database, a single file encrypted as a whole
//!   with AES-256-GCM under the store password; key material inside it is
//!   additionally XORed with a per-key field secret, so plaintext key bytes
//!   never appear in any persisted file image.

mod seal;
mod secrets;
mod store;

use thiserror::Error;

pub use seal::{init_device_seal, DeviceSeal, SealOptions};
pub use secrets::SecretsFile;
pub use store::{KeyState, KeyStore, Namespace, StoredKeyMeta, DEFAULT_RETENTION};

#[derive(Debug, Error)]
pub enum KeystoreError {
    #[error("hardware sealing required but no TPM device is present")]
    SealUnavailable,
    #[error("state directory was sealed under a different device secret")]
    SealMismatch,
    #[error("secret {0:?} not found")]
    NotFound(String),
    #[error("key {0:?} already present")]
    DuplicateKeyId(String),
    #[error("key {0:?} not present")]
    KeyNotPresent(String),
    #[error("key {0:?} was voided")]
    Voided(String),
    #[error("requester {requester:?} is not a target of key {key_id:?}")]
    Unauthorized { key_id: String, requester: String },
    #[error("store file is corrupt: {0}")]
    Corrupt(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
