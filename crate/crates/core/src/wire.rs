//! Canonical JSON wire encoding shared by all message types.
//!
//! Canonical form: UTF-8 JSON with object keys sorted lexicographically and
//! no insignificant whitespace. Byte fields are base64 (RFC 4648, with
//! padding). Decoding distinguishes syntactically malformed input
//! ([`WireError::Parse`]) from structurally invalid messages
//! ([`WireError::Invariant`]): missing or unknown fields and violated type
//! invariants are the latter.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum WireError {
    /// Input is not well-formed JSON.
    #[error("malformed message: {0}")]
    Parse(String),
    /// Input is valid JSON but violates the message schema or an invariant.
    #[error("invalid message: {0}")]
    Invariant(String),
}

/// A message with a canonical wire form and self-checked invariants.
pub trait WireMessage: Serialize + DeserializeOwned {
    /// Checks the type's invariants beyond what serde enforces structurally.
    fn validate(&self) -> Result<(), WireError>;
}

/// Encodes a message to its canonical JSON byte form.
///
/// Total on valid input; panics only if the type's `Serialize` impl itself
/// fails, which none of the wire types do.
pub fn encode<T: WireMessage>(msg: &T) -> Vec<u8> {
    let value = serde_json::to_value(msg).expect("wire types serialize infallibly");
    let mut out = String::new();
    write_canonical(&value, &mut out);
    out.into_bytes()
}

/// Decodes and validates a message from its wire form.
pub fn decode<T: WireMessage>(bytes: &[u8]) -> Result<T, WireError> {
    let value: Value =
        serde_json::from_slice(bytes).map_err(|e| WireError::Parse(e.to_string()))?;
    let msg: T =
        serde_json::from_value(value).map_err(|e| WireError::Invariant(e.to_string()))?;
    msg.validate()?;
    Ok(msg)
}

// Writes `value` as canonical JSON. serde_json's own map ordering depends on
// a cargo feature chosen by the dependency graph, so sorting is done
// explicitly here instead of relying on it.
fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.sort_by(|a, b| a.0.cmp(b.0));
            out.push('{');
            for (i, (key, val)) in entries.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("string serializes"));
                out.push(':');
                write_canonical(val, out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        scalar => out.push_str(&serde_json::to_string(scalar).expect("scalar serializes")),
    }
}

pub(crate) mod b64 {
    //! Serde adapter: `Vec<u8>` as padded standard base64.

    use base64::engine::general_purpose::STANDARD;
    use base64::Engine as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(de)?;
        STANDARD
            .decode(text.as_bytes())
            .map_err(serde::de::Error::custom)
    }
}

pub(crate) fn check_uuid(kind: &str, value: &str) -> Result<(), WireError> {
    uuid::Uuid::parse_str(value)
        .map(|_| ())
        .map_err(|_| WireError::Invariant(format!("{kind} is not a valid UUID: {value:?}")))
}

pub(crate) fn check_url(kind: &str, value: &str) -> Result<(), WireError> {
    url::Url::parse(value)
        .map(|_| ())
        .map_err(|_| WireError::Invariant(format!("{kind} is not a valid URL: {value:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_writer_sorts_keys_recursively() {
        let value: Value = serde_json::from_str(r#"{"b":{"z":1,"a":[{"y":2,"x":3}]},"a":0}"#)
            .unwrap();
        let mut out = String::new();
        write_canonical(&value, &mut out);
        assert_eq!(out, r#"{"a":0,"b":{"a":[{"x":3,"y":2}],"z":1}}"#);
    }

    #[test]
    fn canonical_writer_escapes_strings() {
        let value = Value::String("a\"b\n".to_string());
        let mut out = String::new();
        write_canonical(&value, &mut out);
        assert_eq!(out, r#""a\"b\n""#);
    }
}
