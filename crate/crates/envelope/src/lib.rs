//! The extra encryption layer above HTTPS for node-to-node messages.
//!
//! Message keys are derived per message, either from a KEM shared secret
//! alone (`pqc_only`) or from the XOR of a QKD key with the KEM secret
//! (`hybrid`), so that in hybrid mode both components are needed to decipher
//! a message. Sealing uses AES-256-GCM with a fresh random 12-byte nonce per
//! call and the 16-byte authentication tag appended to the ciphertext.

use aes_gcm::aead::Aead;
use aes_gcm::{Aes256Gcm, KeyInit, Nonce};
use hkdf::Hkdf;
use rand::Rng as _;
use sha2::Sha256;
use thiserror::Error;
use zeroize::Zeroizing;

use keymesh_core::{EncryptedEnvelope, KeyBlock, SaeId, ENVELOPE_NONCE_LEN};

/// Symmetric message key length (AES-256).
pub const MESSAGE_KEY_LEN: usize = 32;

/// KDF label for keys derived from a KEM secret alone.
const LABEL_PQC_ONLY: &[u8] = b"pqc-only";
/// KDF label for keys derived from the QKD/KEM hybrid.
const LABEL_HYBRID: &[u8] = b"hybrid";
/// KDF label for expanding a KEM secret to the QKD key length before XOR.
const LABEL_OTP_EXPAND: &[u8] = b"otp-expand";

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EnvelopeError {
    #[error("empty input to key combination")]
    EmptyInput,
    /// HKDF-SHA256 cannot expand beyond 8160 bytes.
    #[error("cannot expand KEM secret to {0} bytes")]
    ExpandTooLong(usize),
    #[error("authenticated decryption failed")]
    AuthFailure,
}

/// How the message key for one envelope is derived.
#[derive(Debug, Clone)]
pub enum MessageKeyMode {
    /// Key derived from the KEM shared secret alone.
    PqcOnly { kem_secret: Zeroizing<[u8; 32]> },
    /// Key derived from QKD-key XOR expanded-KEM-secret; both components are
    /// required to recover it.
    Hybrid {
        kem_secret: Zeroizing<[u8; 32]>,
        qkd_key: KeyBlock,
    },
}

/// The hybridized key `k' = k_qkd XOR expand(kem)`, kept only in memory.
pub struct HybridKey {
    pub value: Zeroizing<Vec<u8>>,
}

impl HybridKey {
    pub fn combine(qkd_key: &[u8], kem_secret: &[u8]) -> Result<Self, EnvelopeError> {
        Ok(Self {
            value: otp_combine(qkd_key, kem_secret)?,
        })
    }
}

/// XORs `k_ab` with `kem_ab`, expanding `kem_ab` to `k_ab`'s length first
/// when the lengths differ. Equal-length inputs are combined byte for byte,
/// so the operation is an involution in that case.
pub fn otp_combine(
    k_ab: &[u8],
    kem_ab: &[u8],
) -> Result<Zeroizing<Vec<u8>>, EnvelopeError> {
    if k_ab.is_empty() || kem_ab.is_empty() {
        return Err(EnvelopeError::EmptyInput);
    }
    let pad: Zeroizing<Vec<u8>> = if kem_ab.len() == k_ab.len() {
        Zeroizing::new(kem_ab.to_vec())
    } else {
        expand(kem_ab, LABEL_OTP_EXPAND, k_ab.len())?
    };
    let mut out = Zeroizing::new(vec![0u8; k_ab.len()]);
    for (o, (a, b)) in out.iter_mut().zip(k_ab.iter().zip(pad.iter())) {
        *o = a ^ b;
    }
    Ok(out)
}

/// Derives the 32-byte AES message key for one envelope. Pure function of
/// its inputs; the two modes use distinct KDF labels so identical secrets
/// never yield the same key across modes.
pub fn derive_message_key(
    mode: &MessageKeyMode,
) -> Result<Zeroizing<[u8; MESSAGE_KEY_LEN]>, EnvelopeError> {
    let (ikm, label): (Zeroizing<Vec<u8>>, &[u8]) = match mode {
        MessageKeyMode::PqcOnly { kem_secret } => {
            (Zeroizing::new(kem_secret.to_vec()), LABEL_PQC_ONLY)
        }
        MessageKeyMode::Hybrid {
            kem_secret,
            qkd_key,
        } => (
            otp_combine(&qkd_key.key_material, kem_secret.as_ref())?,
            LABEL_HYBRID,
        ),
    };
    let expanded = expand(&ikm, label, MESSAGE_KEY_LEN)?;
    let mut key = Zeroizing::new([0u8; MESSAGE_KEY_LEN]);
    key.copy_from_slice(&expanded);
    Ok(key)
}

fn expand(ikm: &[u8], label: &[u8], len: usize) -> Result<Zeroizing<Vec<u8>>, EnvelopeError> {
    let hk = Hkdf::<Sha256>::new(None, ikm);
    let mut out = Zeroizing::new(vec![0u8; len]);
    hk.expand(label, &mut out)
        .map_err(|_| EnvelopeError::ExpandTooLong(len))?;
    Ok(out)
}

/// Seals `plaintext` into an envelope with a fresh random IV. `session`
/// names the key material used; `sae` must be set iff the session identifier
/// names a QKD key.
pub fn seal(
    plaintext: &[u8],
    key: &[u8; MESSAGE_KEY_LEN],
    session: &str,
    sae: Option<SaeId>,
) -> EncryptedEnvelope {
    let mut iv = [0u8; ENVELOPE_NONCE_LEN];
    rand::rng().fill_bytes(&mut iv);
    let cipher = Aes256Gcm::new(key.into());
    let ciphertext = cipher
        .encrypt(&Nonce::from(iv), plaintext)
        .expect("AES-GCM encryption is infallible for in-memory buffers");
    EncryptedEnvelope {
        iv: iv.to_vec(),
        ciphertext,
        session: session.to_string(),
        sae,
    }
}

/// Opens an envelope, returning the plaintext iff authentication succeeds.
/// A wrong key, tampered ciphertext, or tampered IV all fail identically.
pub fn open(
    envelope: &EncryptedEnvelope,
    key: &[u8; MESSAGE_KEY_LEN],
) -> Result<Vec<u8>, EnvelopeError> {
    if envelope.iv.len() != ENVELOPE_NONCE_LEN {
        return Err(EnvelopeError::AuthFailure);
    }
    let mut iv = [0u8; ENVELOPE_NONCE_LEN];
    iv.copy_from_slice(&envelope.iv);
    let cipher = Aes256Gcm::new(key.into());
    cipher
        .decrypt(&Nonce::from(iv), envelope.ciphertext.as_slice())
        .map_err(|_| EnvelopeError::AuthFailure)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn secret(byte: u8) -> Zeroizing<[u8; 32]> {
        Zeroizing::new([byte; 32])
    }

    const UUID: &str = "3fa85f64-5717-4562-b3fc-2c963f66afa6";

    #[test]
    fn xor_with_zero_operand_is_identity() {
        let s = (0u8..32).collect::<Vec<_>>();
        let out = otp_combine(&[0u8; 32], &s).unwrap();
        assert_eq!(&*out, s.as_slice());
    }

    #[test]
    fn xor_is_an_involution_for_equal_lengths() {
        let k: Vec<u8> = (100u8..132).collect();
        let s: Vec<u8> = (7u8..39).collect();
        let once = otp_combine(&k, &s).unwrap();
        let twice = otp_combine(&once, &s).unwrap();
        assert_eq!(&*twice, k.as_slice());
    }

    #[test]
    fn complement_cancels_to_zero() {
        let out = otp_combine(&[0xFF; 32], &[0xFF; 32]).unwrap();
        assert_eq!(&*out, &[0u8; 32]);
    }

    #[test]
    fn mismatched_lengths_expand_the_kem_secret() {
        // 64-byte QKD key, 32-byte KEM secret: result must still invert.
        let k = vec![0xA5u8; 64];
        let s = [3u8; 32];
        let combined = otp_combine(&k, &s).unwrap();
        assert_eq!(combined.len(), 64);
        let back = otp_combine(&combined, &s).unwrap();
        assert_eq!(&*back, k.as_slice());
    }

    #[test]
    fn empty_inputs_rejected() {
        assert_eq!(otp_combine(b"", &[1]), Err(EnvelopeError::EmptyInput));
        assert_eq!(otp_combine(&[1], b""), Err(EnvelopeError::EmptyInput));
    }

    #[test]
    fn derivation_is_deterministic() {
        let mode = MessageKeyMode::PqcOnly { kem_secret: secret(9) };
        assert_eq!(
            derive_message_key(&mode).unwrap(),
            derive_message_key(&mode).unwrap()
        );
    }

    #[test]
    fn modes_are_label_separated() {
        // A hybrid whose QKD key is all zeros has the same XOR input as the
        // raw KEM secret expanded; the labels must still separate the keys.
        let kem = secret(5);
        let pqc = derive_message_key(&MessageKeyMode::PqcOnly { kem_secret: kem.clone() }).unwrap();
        let hybrid = derive_message_key(&MessageKeyMode::Hybrid {
            kem_secret: kem,
            qkd_key: KeyBlock::new(UUID, vec![0u8; 32]).unwrap(),
        })
        .unwrap();
        assert_ne!(pqc, hybrid);
    }

    #[test]
    fn single_bit_flip_changes_the_key() {
        let kem = secret(4);
        let mut material = vec![0x5Cu8; 32];
        let base = derive_message_key(&MessageKeyMode::Hybrid {
            kem_secret: kem.clone(),
            qkd_key: KeyBlock::new(UUID, material.clone()).unwrap(),
        })
        .unwrap();
        material[17] ^= 0x01;
        let flipped = derive_message_key(&MessageKeyMode::Hybrid {
            kem_secret: kem,
            qkd_key: KeyBlock::new(UUID, material).unwrap(),
        })
        .unwrap();
        assert_ne!(base, flipped);
    }

    #[test]
    fn seal_open_round_trip() {
        let key = [42u8; 32];
        let envelope = seal(b"hello mesh", &key, "s1", None);
        assert_eq!(open(&envelope, &key).unwrap(), b"hello mesh");
    }

    #[test]
    fn repeated_seals_use_fresh_ivs() {
        let key = [1u8; 32];
        let a = seal(b"same plaintext", &key, "s1", None);
        let b = seal(b"same plaintext", &key, "s1", None);
        assert_ne!(a.iv, b.iv);
        assert_ne!(a.ciphertext, b.ciphertext);
    }

    #[test]
    fn empty_plaintext_round_trips() {
        let key = [2u8; 32];
        let envelope = seal(b"", &key, "s1", None);
        assert_eq!(open(&envelope, &key).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn tampered_ciphertext_fails_auth() {
        let key = [3u8; 32];
        let mut envelope = seal(b"payload", &key, "s1", None);
        envelope.ciphertext[0] ^= 0x01;
        assert_eq!(open(&envelope, &key), Err(EnvelopeError::AuthFailure));
    }

    #[test]
    fn tampered_iv_fails_auth() {
        let key = [3u8; 32];
        let mut envelope = seal(b"payload", &key, "s1", None);
        envelope.iv[11] ^= 0x80;
        assert_eq!(open(&envelope, &key), Err(EnvelopeError::AuthFailure));
    }

    #[test]
    fn wrong_key_fails_auth() {
        let envelope = seal(b"payload", &[4u8; 32], "s1", None);
        assert_eq!(open(&envelope, &[5u8; 32]), Err(EnvelopeError::AuthFailure));
    }

    #[test]
    fn hybrid_requires_both_components() {
        let kem = secret(11);
        let qkd = KeyBlock::new(UUID, vec![0xE7u8; 32]).unwrap();
        let good = derive_message_key(&MessageKeyMode::Hybrid {
            kem_secret: kem.clone(),
            qkd_key: qkd.clone(),
        })
        .unwrap();
        let envelope = seal(b"relay", &good, &qkd.key_id, None);

        // Wrong QKD component.
        let wrong_qkd = derive_message_key(&MessageKeyMode::Hybrid {
            kem_secret: kem.clone(),
            qkd_key: KeyBlock::new(UUID, vec![0xE6u8; 32]).unwrap(),
        })
        .unwrap();
        assert_eq!(open(&envelope, &wrong_qkd), Err(EnvelopeError::AuthFailure));

        // Wrong KEM component.
        let wrong_kem = derive_message_key(&MessageKeyMode::Hybrid {
            kem_secret: secret(12),
            qkd_key: qkd,
        })
        .unwrap();
        assert_eq!(open(&envelope, &wrong_kem), Err(EnvelopeError::AuthFailure));
    }
}
