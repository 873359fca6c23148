//! Shared domain types for the keymesh overlay: identifiers, key material
//! containers, relay messages, and their canonical JSON wire encoding.
//!
//! Every message that crosses a process boundary in the mesh is defined here,
//! so the trusted-node service, the simulated QKD nodes, the SAE client and
//! the benchmark harness all agree on one wire format. Encoding is canonical
//! (object keys sorted, no insignificant whitespace, base64 with padding for
//! byte fields) which keeps golden-file tests byte-exact.

pub mod envelope;
pub mod ids;
pub mod material;
pub mod relay;
pub mod wire;

pub use envelope::EncryptedEnvelope;
pub use ids::{KmeId, SaeId};
pub use material::{KeyBlock, KeyContainer, KeyEntry};
pub use relay::{
    validate_extensions, AckBatch, AckContainer, AckStatus, ExtKeyContainer, ExtensionRecord,
    MandatoryExtensionError, VoidKeysContainer,
};
pub use wire::{decode, encode, WireError, WireMessage};

/// Version tag carried by every relay payload message.
pub const WIRE_VERSION: &str = "v1";

/// AEAD nonce length used by the secure envelope layer; the `iv` field of an
/// [`EncryptedEnvelope`] must decode to exactly this many bytes.
pub const ENVELOPE_NONCE_LEN: usize = 12;

/// Maximum accepted length for identifier strings.
pub const MAX_ID_LEN: usize = 256;
