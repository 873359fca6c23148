//! Opaque identifier newtypes for application endpoints and QKD entities.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::wire::WireError;
use crate::MAX_ID_LEN;

/// Identifier of a Secure Application Entity (an application endpoint that
/// consumes keys). Unique per endpoint within a deployment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SaeId(String);

/// Identifier of a Key Management Entity (one side of a QKD node pair).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KmeId(String);

fn check_id(kind: &str, value: &str) -> Result<(), WireError> {
    if value.is_empty() {
        return Err(WireError::Invariant(format!("{kind} must be non-empty")));
    }
    if value.len() > MAX_ID_LEN {
        return Err(WireError::Invariant(format!(
            "{kind} exceeds {MAX_ID_LEN} characters"
        )));
    }
    Ok(())
}

impl SaeId {
    pub fn new(value: impl Into<String>) -> Result<Self, WireError> {
        let value = value.into();
        check_id("sae_id", &value)?;
        Ok(Self(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub(crate) fn validate(&self) -> Result<(), WireError> {
        check_id("sae_id", &self.0)
    }
}

impl KmeId {
    pub fn new(value: impl Into<String>) -> Result<Self, WireError> {
        let value = value.into();
        check_id("kme_id", &value)?;
        Ok(Self(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SaeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for KmeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<&str> for SaeId {
    type Error = WireError;

    fn try_from(value: &str) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl TryFrom<&str> for KmeId {
    type Error = WireError;

    fn try_from(value: &str) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}
