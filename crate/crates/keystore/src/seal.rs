//! Device-bound sealing of the store master secret.

use std::fs;
use std::path::{Path, PathBuf};

use aes_gcm::aead::Aead;
use aes_gcm::{Aes256Gcm, KeyInit, Nonce};
use hkdf::Hkdf;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use zeroize::Zeroizing;

use crate::KeystoreError;

const SEAL_BLOB: &str = "seal.blob";
const DEVICE_SECRET_LEN: usize = 32;

/// How the master secret ended up unsealed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SealBacking {
    /// Software-emulated device secret (no hardware module present).
    EmulatedDevice,
    /// Password from configuration; last rung of the fallback ladder.
    Password,
}

#[derive(Debug, Clone)]
pub struct SealOptions {
    /// Fail instead of falling back to software emulation.
    pub require_hardware: bool,
    /// Where the emulated device secret lives. Deliberately outside the
    /// state directory, like the hardware module it stands in for.
    pub device_secret_path: PathBuf,
    /// Store password used when no sealing mechanism is available at all.
    pub password: Option<String>,
}

impl SealOptions {
    pub fn emulated(device_secret_path: impl Into<PathBuf>) -> Self {
        Self {
            require_hardware: false,
            device_secret_path: device_secret_path.into(),
            password: None,
        }
    }
}

/// An unsealed store master secret bound to this device.
pub struct DeviceSeal {
    state_dir: PathBuf,
    master: Zeroizing<[u8; 32]>,
    emulated: bool,
    warnings: Vec<String>,
}

impl DeviceSeal {
    pub fn state_dir(&self) -> &Path {
        &self.state_dir
    }

    pub fn emulated(&self) -> bool {
        self.emulated
    }

    /// Warnings produced while unsealing (missing hardware, password
    /// fallback). Also emitted through `tracing` at init time.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub(crate) fn master(&self) -> &[u8; 32] {
        &self.master
    }
}

#[derive(Serialize, Deserialize)]
struct SealBlob {
    version: String,
    salt: String,
    iv: String,
    wrapped_master: String,
}

/// Creates or loads the sealed master secret for `state_dir`.
///
/// Fallback ladder: a hardware TPM would be preferred, but none is ever
/// present in this build, so with `require_hardware` set this always fails.
/// Otherwise a software device secret is created (with warnings), and if
/// that path is unusable, the configured password is used as the final rung.
pub fn init_device_seal(
    state_dir: impl AsRef<Path>,
    options: &SealOptions,
) -> Result<DeviceSeal, KeystoreError> {
    let state_dir = state_dir.as_ref().to_path_buf();
    fs::create_dir_all(&state_dir)?;

    if options.require_hardware {
        // /dev/tpm0 or /dev/tpmrm0 would be probed here; hardware access is
        // out of scope for this build, so requiring it is always an error.
        return Err(KeystoreError::SealUnavailable);
    }

    let mut warnings = Vec::new();
    let (device_key, backing) = match load_or_create_device_secret(&options.device_secret_path) {
        Ok(secret) => {
            warnings.push(format!(
                "no hardware TPM available; sealing with an emulated device secret at {}",
                options.device_secret_path.display()
            ));
            (secret, SealBacking::EmulatedDevice)
        }
        Err(err) => match &options.password {
            Some(password) => {
                warnings.push(format!(
                    "device secret unavailable ({err}); deriving the store key from the \
                     configured password"
                ));
                (
                    Zeroizing::new(password.as_bytes().to_vec()),
                    SealBacking::Password,
                )
            }
            None => return Err(err),
        },
    };
    for warning in &warnings {
        tracing::warn!("{warning}");
    }

    let blob_path = state_dir.join(SEAL_BLOB);
    let master = if blob_path.exists() {
        unwrap_master(&blob_path, &device_key)?
    } else {
        let master = fresh_master(&blob_path, &device_key)?;
        restrict_permissions(&blob_path);
        master
    };

    Ok(DeviceSeal {
        state_dir,
        master,
        emulated: matches!(backing, SealBacking::EmulatedDevice | SealBacking::Password),
        warnings,
    })
}

fn load_or_create_device_secret(
    path: &Path,
) -> Result<Zeroizing<Vec<u8>>, KeystoreError> {
    if path.exists() {
        let bytes = fs::read(path)?;
        if bytes.len() != DEVICE_SECRET_LEN {
            return Err(KeystoreError::Corrupt(format!(
                "device secret at {} has wrong length",
                path.display()
            )));
        }
        return Ok(Zeroizing::new(bytes));
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut secret = vec![0u8; DEVICE_SECRET_LEN];
    rand::rng().fill_bytes(&mut secret);
    fs::write(path, &secret)?;
    restrict_permissions(path);
    Ok(Zeroizing::new(secret))
}

fn wrap_key(device_key: &[u8], salt: &[u8]) -> Zeroizing<[u8; 32]> {
    let hk = Hkdf::<Sha256>::new(Some(salt), device_key);
    let mut key = Zeroizing::new([0u8; 32]);
    hk.expand(b"seal-wrap-v1", key.as_mut())
        .expect("32 bytes is a valid HKDF output length");
    key
}

fn fresh_master(
    blob_path: &Path,
    device_key: &[u8],
) -> Result<Zeroizing<[u8; 32]>, KeystoreError> {
    let mut master = Zeroizing::new([0u8; 32]);
    rand::rng().fill_bytes(master.as_mut());

    let mut salt = [0u8; 16];
    rand::rng().fill_bytes(&mut salt);
    let mut iv = [0u8; 12];
    rand::rng().fill_bytes(&mut iv);

    let cipher = Aes256Gcm::new((&*wrap_key(device_key, &salt)).into());
    let wrapped = cipher
        .encrypt(&Nonce::from(iv), master.as_ref())
        .expect("in-memory encryption");

    let blob = SealBlob {
        version: "v1".into(),
        salt: b64(&salt),
        iv: b64(&iv),
        wrapped_master: b64(&wrapped),
    };
    fs::write(blob_path, serde_json::to_vec(&blob).expect("blob serializes"))?;
    Ok(master)
}

fn unwrap_master(
    blob_path: &Path,
    device_key: &[u8],
) -> Result<Zeroizing<[u8; 32]>, KeystoreError> {
    let blob: SealBlob = serde_json::from_slice(&fs::read(blob_path)?)
        .map_err(|e| KeystoreError::Corrupt(format!("seal blob: {e}")))?;
    let salt = unb64("salt", &blob.salt)?;
    let iv = unb64("iv", &blob.iv)?;
    let wrapped = unb64("wrapped_master", &blob.wrapped_master)?;
    if iv.len() != 12 {
        return Err(KeystoreError::Corrupt("seal blob iv length".into()));
    }

    let cipher = Aes256Gcm::new((&*wrap_key(device_key, &salt)).into());
    let mut iv_arr = [0u8; 12];
    iv_arr.copy_from_slice(&iv);
    let master_vec = cipher
        .decrypt(&Nonce::from(iv_arr), wrapped.as_slice())
        .map_err(|_| KeystoreError::SealMismatch)?;
    if master_vec.len() != 32 {
        return Err(KeystoreError::Corrupt("unsealed master length".into()));
    }
    let mut master = Zeroizing::new([0u8; 32]);
    master.copy_from_slice(&master_vec);
    Ok(master)
}

pub(crate) fn b64(bytes: &[u8]) -> String {
    use base64::Engine as _;
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

pub(crate) fn unb64(field: &str, text: &str) -> Result<Vec<u8>, KeystoreError> {
    use base64::Engine as _;
    base64::engine::general_purpose::STANDARD
        .decode(text.as_bytes())
        .map_err(|e| KeystoreError::Corrupt(format!("{field}: {e}")))
}

pub(crate) fn restrict_permissions(path: &Path) {
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let _ = fs::set_permissions(path, fs::Permissions::from_mode(0o600));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_seal_is_emulated_and_warns() {
        let dir = tempfile::tempdir().unwrap();
        let opts = SealOptions::emulated(dir.path().join("device.secret"));
        let seal = init_device_seal(dir.path().join("state"), &opts).unwrap();
        assert!(seal.emulated());
        assert!(!seal.warnings().is_empty());
    }

    #[test]
    fn second_init_unseals_the_same_master() {
        let dir = tempfile::tempdir().unwrap();
        let opts = SealOptions::emulated(dir.path().join("device.secret"));
        let first = init_device_seal(dir.path().join("state"), &opts).unwrap();
        let second = init_device_seal(dir.path().join("state"), &opts).unwrap();
        assert_eq!(first.master(), second.master());
    }

    #[test]
    fn different_device_secret_cannot_unseal() {
        let dir = tempfile::tempdir().unwrap();
        let state = dir.path().join("state");
        let first = SealOptions::emulated(dir.path().join("device-a.secret"));
        init_device_seal(&state, &first).unwrap();

        // Same state directory, different device secret: unseal must fail.
        let second = SealOptions::emulated(dir.path().join("device-b.secret"));
        assert!(matches!(
            init_device_seal(&state, &second),
            Err(KeystoreError::SealMismatch)
        ));
    }

    #[test]
    fn require_hardware_fails_without_tpm() {
        let dir = tempfile::tempdir().unwrap();
        let opts = SealOptions {
            require_hardware: true,
            device_secret_path: dir.path().join("device.secret"),
            password: None,
        };
        assert!(matches!(
            init_device_seal(dir.path().join("state"), &opts),
            Err(KeystoreError::SealUnavailable)
        ));
    }

    #[test]
    fn password_fallback_when_device_secret_unwritable() {
        let dir = tempfile::tempdir().unwrap();
        // A directory at the device-secret path makes it unreadable as a file.
        let bad_path = dir.path().join("blocked");
        fs::create_dir_all(&bad_path).unwrap();
        let opts = SealOptions {
            require_hardware: false,
            device_secret_path: bad_path,
            password: Some("store-password".into()),
        };
        let seal = init_device_seal(dir.path().join("state"), &opts).unwrap();
        assert!(seal.warnings().iter().any(|w| w.contains("password")));

        // Same password unseals; a different one does not.
        let again = init_device_seal(dir.path().join("state"), &opts).unwrap();
        assert_eq!(seal.master(), again.master());
        let wrong = SealOptions {
            password: Some("other".into()),
            ..opts
        };
        assert!(matches!(
            init_device_seal(dir.path().join("state"), &wrong),
            Err(KeystoreError::SealMismatch)
        ));
    }
}
