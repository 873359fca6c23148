//! Relay payload messages exchanged between trusted nodes: proactive key
//! sharing, asynchronous acknowledgements, and key voiding.
//!
//! These are the plaintexts carried inside an
//! [`EncryptedEnvelope`](crate::EncryptedEnvelope). Each embeds the wire
//! format version tag so the format can evolve.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::ids::SaeId;
use crate::material::KeyBlock;
use crate::wire::{check_url, check_uuid, WireError, WireMessage};
use crate::WIRE_VERSION;

/// Outcome of a relay as reported in an acknowledgement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AckStatus {
    Relayed,
    Voided,
    Failed,
    KeyNotPresent,
}

/// An opaque extension record; only the name takes part in negotiation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtensionRecord {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Value>,
}

/// Proactive key-sharing payload: keys plus ownership, targets, and the
/// callback for the asynchronous acknowledgement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtKeyContainer {
    pub version: String,
    pub keys: Vec<KeyBlock>,
    /// QKD-side SAE the keys belong to.
    pub owner_master_sae_id: SaeId,
    pub target_sae_ids: Vec<SaeId>,
    pub ack_callback_url: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extension_mandatory: Vec<ExtensionRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extension_optional: Vec<ExtensionRecord>,
}

impl WireMessage for ExtKeyContainer {
    fn validate(&self) -> Result<(), WireError> {
        check_version(&self.version)?;
        for key in &self.keys {
            key.validate()?;
        }
        if self.target_sae_ids.is_empty() {
            return Err(WireError::Invariant(
                "target_sae_ids must be non-empty".into(),
            ));
        }
        check_url("ack_callback_url", &self.ack_callback_url)?;
        for ext in self
            .extension_mandatory
            .iter()
            .chain(&self.extension_optional)
        {
            if ext.name.is_empty() {
                return Err(WireError::Invariant("extension name must be non-empty".into()));
            }
        }
        Ok(())
    }
}

/// One acknowledgement for a set of relayed key ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AckContainer {
    pub key_ids: Vec<String>,
    pub ack_status: AckStatus,
    pub initiator_sae_id: SaeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<BTreeMap<String, Value>>,
}

impl WireMessage for AckContainer {
    fn validate(&self) -> Result<(), WireError> {
        if self.key_ids.is_empty() {
            return Err(WireError::Invariant("key_ids must be non-empty".into()));
        }
        for id in &self.key_ids {
            check_uuid("key_id", id)?;
        }
        Ok(())
    }
}

/// The body posted to an acknowledgement callback: a batch of ack containers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AckBatch {
    pub version: String,
    pub acks: Vec<AckContainer>,
}

impl WireMessage for AckBatch {
    fn validate(&self) -> Result<(), WireError> {
        check_version(&self.version)?;
        for ack in &self.acks {
            ack.validate()?;
        }
        Ok(())
    }
}

/// Request to void previously relayed keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoidKeysContainer {
    pub version: String,
    pub key_ids: Vec<String>,
    pub initiator_sae_id: SaeId,
    pub ack_callback_url: String,
}

impl WireMessage for VoidKeysContainer {
    fn validate(&self) -> Result<(), WireError> {
        check_version(&self.version)?;
        if self.key_ids.is_empty() {
            return Err(WireError::Invariant("key_ids must be non-empty".into()));
        }
        for id in &self.key_ids {
            check_uuid("key_id", id)?;
        }
        check_url("ack_callback_url", &self.ack_callback_url)?;
        Ok(())
    }
}

fn check_version(version: &str) -> Result<(), WireError> {
    if version != WIRE_VERSION {
        return Err(WireError::Invariant(format!(
            "unsupported wire version {version:?}, expected {WIRE_VERSION:?}"
        )));
    }
    Ok(())
}

/// Raised when a message carries mandatory extensions the receiver has not
/// implemented.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("unsupported mandatory extensions: {}", unsupported.join(", "))]
pub struct MandatoryExtensionError {
    pub unsupported: Vec<String>,
}

/// Accepts a container iff every mandatory extension name is supported.
/// Optional extensions never cause failure and may be ignored.
pub fn validate_extensions(
    container: &ExtKeyContainer,
    supported: &BTreeSet<String>,
) -> Result<(), MandatoryExtensionError> {
    let unsupported: Vec<String> = container
        .extension_mandatory
        .iter()
        .filter(|ext| !supported.contains(&ext.name))
        .map(|ext| ext.name.clone())
        .collect();
    if unsupported.is_empty() {
        Ok(())
    } else {
        Err(MandatoryExtensionError { unsupported })
    }
}
