//! ML-KEM parameter set selection and the keygen/encapsulate/decapsulate
//! primitives behind it.

use ml_kem::kem::{Decapsulate, Encapsulate, Kem, KeyExport};
use ml_kem::{EncapsulationKey, MlKem1024, MlKem512, MlKem768};
use zeroize::Zeroizing;

use crate::{KemChannelError, SHARED_SECRET_LEN};

/// FIPS 203 parameter set used for the channel. Both peers must agree; the
/// default across the mesh is ML-KEM-768.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KemParams {
    MlKem512,
    #[default]
    MlKem768,
    MlKem1024,
}

/// The responder's in-memory decapsulation key for one exchange.
pub(crate) enum DecapKey {
    MlKem512(<MlKem512 as Kem>::DecapsulationKey),
    MlKem768(<MlKem768 as Kem>::DecapsulationKey),
    MlKem1024(<MlKem1024 as Kem>::DecapsulationKey),
}

impl KemParams {
    pub fn public_key_len(self) -> usize {
        match self {
            KemParams::MlKem512 => 800,
            KemParams::MlKem768 => 1184,
            KemParams::MlKem1024 => 1568,
        }
    }

    pub fn ciphertext_len(self) -> usize {
        match self {
            KemParams::MlKem512 => 768,
            KemParams::MlKem768 => 1088,
            KemParams::MlKem1024 => 1568,
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "ml-kem-512" => Some(KemParams::MlKem512),
            "ml-kem-768" => Some(KemParams::MlKem768),
            "ml-kem-1024" => Some(KemParams::MlKem1024),
            _ => None,
        }
    }

    /// Generates a fresh key pair, returning the encoded public key and the
    /// private decapsulation key.
    pub(crate) fn generate_keypair(self) -> (Vec<u8>, DecapKey) {
        match self {
            KemParams::MlKem512 => {
                let (dk, ek) = MlKem512::generate_keypair();
                (ek.to_bytes().to_vec(), DecapKey::MlKem512(dk))
            }
            KemParams::MlKem768 => {
                let (dk, ek) = MlKem768::generate_keypair();
                (ek.to_bytes().to_vec(), DecapKey::MlKem768(dk))
            }
            KemParams::MlKem1024 => {
                let (dk, ek) = MlKem1024::generate_keypair();
                (ek.to_bytes().to_vec(), DecapKey::MlKem1024(dk))
            }
        }
    }

    /// Encapsulates to an encoded peer public key, returning the ciphertext
    /// and the shared secret.
    pub(crate) fn encapsulate(
        self,
        public_key: &[u8],
    ) -> Result<(Vec<u8>, Zeroizing<[u8; SHARED_SECRET_LEN]>), KemChannelError> {
        macro_rules! run {
            ($kem:ty) => {{
                let key_bytes = public_key
                    .try_into()
                    .map_err(|_| KemChannelError::InvalidPeerKey)?;
                let ek = EncapsulationKey::<$kem>::new(key_bytes)
                    .map_err(|_| KemChannelError::InvalidPeerKey)?;
                let (ciphertext, shared) = ek.encapsulate();
                Ok((ciphertext.to_vec(), to_secret(&shared)))
            }};
        }

        match self {
            KemParams::MlKem512 => run!(MlKem512),
            KemParams::MlKem768 => run!(MlKem768),
            KemParams::MlKem1024 => run!(MlKem1024),
        }
    }
}

impl DecapKey {
    /// Recovers the shared secret from an encoded ciphertext. ML-KEM uses
    /// implicit rejection: a tampered ciphertext of the right length yields
    /// a different secret rather than an error.
    pub(crate) fn decapsulate(
        &self,
        ciphertext: &[u8],
    ) -> Result<Zeroizing<[u8; SHARED_SECRET_LEN]>, KemChannelError> {
        let shared = match self {
            DecapKey::MlKem512(dk) => dk.decapsulate_slice(ciphertext),
            DecapKey::MlKem768(dk) => dk.decapsulate_slice(ciphertext),
            DecapKey::MlKem1024(dk) => dk.decapsulate_slice(ciphertext),
        }
        .map_err(|_| KemChannelError::Protocol("ciphertext has wrong length".into()))?;
        Ok(to_secret(&shared))
    }
}

fn to_secret(shared: &[u8]) -> Zeroizing<[u8; SHARED_SECRET_LEN]> {
    let mut secret = Zeroizing::new([0u8; SHARED_SECRET_LEN]);
    secret.copy_from_slice(shared);
    secret
}
