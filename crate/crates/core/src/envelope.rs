//! The on-wire ciphered wrapper for all KMS-to-KMS messages.

use serde::{Deserialize, Serialize};

use crate::ids::SaeId;
use crate::wire::{b64, WireError, WireMessage};
use crate::ENVELOPE_NONCE_LEN;

/// Encrypted wrapper around a relay payload: `{iv, ciphertext, session, [sae]}`.
///
/// `session` names the ephemeral key used to seal the message (a KEM session
/// id, or the transport QKD key id in hybrid mode). `sae` is present exactly
/// when the session identifier names a QKD key, and then carries the QKD-side
/// SAE that owns that key. The authentication tag is appended to
/// `ciphertext`; `iv` is unique per (session, message).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncryptedEnvelope {
    #[serde(with = "b64")]
    pub iv: Vec<u8>,
    #[serde(with = "b64")]
    pub ciphertext: Vec<u8>,
    pub session: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sae: Option<SaeId>,
}

impl WireMessage for EncryptedEnvelope {
    fn validate(&self) -> Result<(), WireError> {
        if self.iv.len() != ENVELOPE_NONCE_LEN {
            return Err(WireError::Invariant(format!(
                "iv must decode to {ENVELOPE_NONCE_LEN} bytes, got {}",
                self.iv.len()
            )));
        }
        if self.session.is_empty() {
            return Err(WireError::Invariant("session must be non-empty".into()));
        }
        if let Some(sae) = &self.sae {
            sae.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::{decode, encode};

    fn sample(sae: Option<&str>) -> EncryptedEnvelope {
        EncryptedEnvelope {
            iv: vec![0u8; ENVELOPE_NONCE_LEN],
            ciphertext: b"xyz".to_vec(),
            session: "s1".into(),
            sae: sae.map(|s| SaeId::new(s).unwrap()),
        }
    }

    #[test]
    fn encodes_exactly_the_required_keys_when_sae_absent() {
        let bytes = encode(&sample(None));
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            r#"{"ciphertext":"eHl6","iv":"AAAAAAAAAAAAAAAA","session":"s1"}"#
        );
    }

    #[test]
    fn encodes_sae_when_present() {
        let text = String::from_utf8(encode(&sample(Some("SAE-A")))).unwrap();
        assert!(text.contains(r#""sae":"SAE-A""#), "{text}");
    }

    #[test]
    fn empty_input_is_a_parse_error() {
        match decode::<EncryptedEnvelope>(b"") {
            Err(WireError::Parse(_)) => {}
            other => panic!("expected Parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_session_is_an_invariant_error() {
        let json = br#"{"ciphertext":"eHl6","iv":"AAAAAAAAAAAAAAAA"}"#;
        match decode::<EncryptedEnvelope>(json) {
            Err(WireError::Invariant(_)) => {}
            other => panic!("expected Invariant error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_field_is_an_invariant_error() {
        let json =
            br#"{"ciphertext":"eHl6","iv":"AAAAAAAAAAAAAAAA","session":"s1","extra":true}"#;
        assert!(matches!(
            decode::<EncryptedEnvelope>(json),
            Err(WireError::Invariant(_))
        ));
    }

    #[test]
    fn wrong_iv_length_rejected() {
        let mut env = sample(None);
        env.iv = vec![0u8; 11];
        assert!(env.validate().is_err());
    }
}
