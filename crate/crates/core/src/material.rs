//! Key material containers: the internal [`KeyBlock`] unit and the
//! REST-facing [`KeyContainer`] delivered to SAEs.

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::wire::{b64, check_uuid, WireError, WireMessage};

/// One identified unit of secret key material.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyBlock {
    /// UUID string, unique within any one store.
    pub key_id: String,
    #[serde(with = "b64")]
    pub key_material: Vec<u8>,
    /// Bit length of the material; always `8 * key_material.len()`.
    pub size_bits: u32,
}

impl KeyBlock {
    pub fn new(key_id: impl Into<String>, key_material: Vec<u8>) -> Result<Self, WireError> {
        let block = Self {
            key_id: key_id.into(),
            size_bits: (key_material.len() * 8) as u32,
            key_material,
        };
        block.validate()?;
        Ok(block)
    }

    /// Returns a copy truncated to `size_bits`, which must not exceed the
    /// block's own size and must be a positive multiple of 8.
    pub fn truncated(&self, size_bits: u32) -> Result<Self, WireError> {
        if size_bits == 0 || size_bits % 8 != 0 {
            return Err(WireError::Invariant(format!(
                "requested size {size_bits} is not a positive multiple of 8"
            )));
        }
        if size_bits > self.size_bits {
            return Err(WireError::Invariant(format!(
                "requested size {size_bits} exceeds block size {}",
                self.size_bits
            )));
        }
        Ok(Self {
            key_id: self.key_id.clone(),
            key_material: self.key_material[..(size_bits / 8) as usize].to_vec(),
            size_bits,
        })
    }
}

impl WireMessage for KeyBlock {
    fn validate(&self) -> Result<(), WireError> {
        check_uuid("key_id", &self.key_id)?;
        if self.size_bits == 0 || self.size_bits % 8 != 0 {
            return Err(WireError::Invariant(format!(
                "size_bits {} is not a positive multiple of 8",
                self.size_bits
            )));
        }
        if self.key_material.len() * 8 != self.size_bits as usize {
            return Err(WireError::Invariant(format!(
                "key_material is {} bytes but size_bits is {}",
                self.key_material.len(),
                self.size_bits
            )));
        }
        Ok(())
    }
}

/// One `{key_ID, key}` entry of a [`KeyContainer`], key material as base64.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyEntry {
    #[serde(rename = "key_ID")]
    pub key_id: String,
    pub key: String,
}

impl KeyEntry {
    pub fn from_block(block: &KeyBlock) -> Self {
        Self {
            key_id: block.key_id.clone(),
            key: STANDARD.encode(&block.key_material),
        }
    }

    pub fn to_block(&self) -> Result<KeyBlock, WireError> {
        let material = STANDARD
            .decode(self.key.as_bytes())
            .map_err(|e| WireError::Invariant(format!("key is not valid base64: {e}")))?;
        KeyBlock::new(self.key_id.clone(), material)
    }
}

/// REST key-delivery response: the container of keys handed to an SAE.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyContainer {
    pub keys: Vec<KeyEntry>,
}

impl KeyContainer {
    pub fn from_blocks<'a>(blocks: impl IntoIterator<Item = &'a KeyBlock>) -> Self {
        Self {
            keys: blocks.into_iter().map(KeyEntry::from_block).collect(),
        }
    }

    pub fn to_blocks(&self) -> Result<Vec<KeyBlock>, WireError> {
        self.keys.iter().map(KeyEntry::to_block).collect()
    }
}

impl WireMessage for KeyContainer {
    fn validate(&self) -> Result<(), WireError> {
        for entry in &self.keys {
            check_uuid("key_ID", &entry.key_id)?;
            STANDARD
                .decode(entry.key.as_bytes())
                .map_err(|e| WireError::Invariant(format!("key is not valid base64: {e}")))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ID: &str = "3fa85f64-5717-4562-b3fc-2c963f66afa6";

    #[test]
    fn key_block_size_must_match_material() {
        let block = KeyBlock::new(ID, vec![0u8; 32]).unwrap();
        assert_eq!(block.size_bits, 256);

        let mut bad = block.clone();
        bad.size_bits = 128;
        assert!(bad.validate().is_err());

        assert!(KeyBlock::new("not-a-uuid", vec![1, 2]).is_err());
    }

    #[test]
    fn truncation_keeps_prefix_and_rejects_growth() {
        let block = KeyBlock::new(ID, (0u8..32).collect()).unwrap();
        let short = block.truncated(128).unwrap();
        assert_eq!(short.key_material, (0u8..16).collect::<Vec<_>>());
        assert_eq!(short.size_bits, 128);
        assert!(block.truncated(512).is_err());
        assert!(block.truncated(13).is_err());
    }

    #[test]
    fn container_round_trips_blocks() {
        let block = KeyBlock::new(ID, vec![7u8; 16]).unwrap();
        let container = KeyContainer::from_blocks([&block]);
        assert_eq!(container.to_blocks().unwrap(), vec![block]);
    }
}
