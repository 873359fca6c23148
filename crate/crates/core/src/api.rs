//! REST request/response bodies and the error shape shared by every HTTP
//! surface in the mesh.

use serde::{Deserialize, Serialize};

use crate::ids::{KmeId, SaeId};

/// Key request body for `POST /api/v1/keys/{slave_sae_id}/enc_keys`.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct EncKeysRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub number: Option<u32>,
    /// Requested key size in bits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<u32>,
    /// Further SAEs the keys shall be shared with, typically remote ones
    /// reached by relaying. Stripped from sanitized southbound requests.
    #[serde(
        default,
        rename = "additional_slave_SAE_IDs",
        skip_serializing_if = "Vec::is_empty"
    )]
    pub additional_slave_sae_ids: Vec<SaeId>,
}

/// One key id entry of a [`DecKeysRequest`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct KeyIdEntry {
    #[serde(rename = "key_ID")]
    pub key_id: String,
}

/// Key retrieval body for `POST /api/v1/keys/{master_sae_id}/dec_keys`.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct DecKeysRequest {
    #[serde(rename = "key_IDs")]
    pub key_ids: Vec<KeyIdEntry>,
}

impl DecKeysRequest {
    pub fn from_ids<I: IntoIterator<Item = S>, S: Into<String>>(ids: I) -> Self {
        Self {
            key_ids: ids
                .into_iter()
                .map(|id| KeyIdEntry { key_id: id.into() })
                .collect(),
        }
    }

    pub fn ids(&self) -> Vec<String> {
        self.key_ids.iter().map(|e| e.key_id.clone()).collect()
    }
}

/// Status of one key-delivery interface.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StatusBody {
    #[serde(rename = "source_KME_ID")]
    pub source_kme_id: KmeId,
    #[serde(rename = "target_KME_ID")]
    pub target_kme_id: KmeId,
    #[serde(rename = "master_SAE_ID")]
    pub master_sae_id: SaeId,
    #[serde(rename = "slave_SAE_ID")]
    pub slave_sae_id: SaeId,
    pub key_size: u32,
    pub stored_key_count: u32,
    pub max_key_count: u32,
}

/// Machine-readable error codes carried in every error response.
pub mod code {
    pub const DEPLETED: &str = "DEPLETED";
    pub const KEY_NOT_PRESENT: &str = "KEY_NOT_PRESENT";
    pub const VOIDED: &str = "VOIDED";
    pub const UNKNOWN_SAE: &str = "UNKNOWN_SAE";
    pub const UNAUTHORIZED: &str = "UNAUTHORIZED";
    pub const AUTH_FAILURE: &str = "AUTH_FAILURE";
    pub const MANDATORY_EXTENSION: &str = "MANDATORY_EXTENSION";
    pub const UNREACHABLE: &str = "UNREACHABLE";
    pub const SIZE_UNSUPPORTED: &str = "SIZE_UNSUPPORTED";
    pub const BAD_REQUEST: &str = "BAD_REQUEST";
    pub const INTERNAL: &str = "INTERNAL";
}

/// Error response body.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<String>,
}

impl ErrorBody {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.to_string(),
            message: message.into(),
            details: Vec::new(),
        }
    }

    pub fn with_details(mut self, details: Vec<String>) -> Self {
        self.details = details;
        self
    }
}
