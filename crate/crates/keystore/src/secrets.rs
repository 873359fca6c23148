//! The secrets file: named secrets under the device seal.
//!
//! Each entry is stored as a random 16-byte IV plus a chained-XOR
//! ciphertext: `c[i] = v[i] ^ pad[i] ^ c[i-1]` with `c[-1] = 0` and
//! `pad = HKDF(master, salt = iv, info = "secret:" || name)`. The per-entry
//! IV and the chaining keep equal values from producing equal entries.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use hkdf::Hkdf;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use zeroize::Zeroizing;

use crate::seal::{b64, restrict_permissions, unb64, DeviceSeal};
use crate::KeystoreError;

const SECRETS_FILE: &str = "secrets.dat";

#[derive(Serialize, Deserialize, Default)]
struct SecretsImage {
    version: String,
    entries: BTreeMap<String, SecretEntry>,
}

#[derive(Serialize, Deserialize)]
struct SecretEntry {
    iv: String,
    data: String,
}

/// Named secrets persisted in the state directory, readable only under the
/// seal that created them.
pub struct SecretsFile {
    path: PathBuf,
    master: Zeroizing<[u8; 32]>,
    image: SecretsImage,
}

impl SecretsFile {
    pub fn open(seal: &DeviceSeal) -> Result<Self, KeystoreError> {
        let path = seal.state_dir().join(SECRETS_FILE);
        let image = if path.exists() {
            serde_json::from_slice(&fs::read(&path)?)
                .map_err(|e| KeystoreError::Corrupt(format!("secrets file: {e}")))?
        } else {
            SecretsImage {
                version: "v1".into(),
                entries: BTreeMap::new(),
            }
        };
        Ok(Self {
            path,
            master: Zeroizing::new(*seal.master()),
            image,
        })
    }

    pub fn seal_secret(&mut self, name: &str, value: &[u8]) -> Result<(), KeystoreError> {
        let mut iv = [0u8; 16];
        rand::rng().fill_bytes(&mut iv);
        let pad = self.pad(name, &iv, value.len());

        let mut data = vec![0u8; value.len()];
        let mut prev = 0u8;
        for (i, (&v, &p)) in value.iter().zip(pad.iter()).enumerate() {
            data[i] = v ^ p ^ prev;
            prev = data[i];
        }

        self.image.entries.insert(
            name.to_string(),
            SecretEntry {
                iv: b64(&iv),
                data: b64(&data),
            },
        );
        self.persist()
    }

    pub fn unseal_secret(&self, name: &str) -> Result<Zeroizing<Vec<u8>>, KeystoreError> {
        let entry = self
            .image
            .entries
            .get(name)
            .ok_or_else(|| KeystoreError::NotFound(name.to_string()))?;
        let iv = unb64("iv", &entry.iv)?;
        let data = unb64("data", &entry.data)?;
        let pad = self.pad(name, &iv, data.len());

        let mut value = Zeroizing::new(vec![0u8; data.len()]);
        let mut prev = 0u8;
        for (i, (&c, &p)) in data.iter().zip(pad.iter()).enumerate() {
            value[i] = c ^ p ^ prev;
            prev = c;
        }
        Ok(value)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.image.entries.contains_key(name)
    }

    /// Returns the named secret, creating it with `len` random bytes first
    /// if absent.
    pub fn get_or_create(
        &mut self,
        name: &str,
        len: usize,
    ) -> Result<Zeroizing<Vec<u8>>, KeystoreError> {
        if !self.contains(name) {
            let mut value = Zeroizing::new(vec![0u8; len]);
            rand::rng().fill_bytes(&mut value);
            self.seal_secret(name, &value)?;
        }
        self.unseal_secret(name)
    }

    fn pad(&self, name: &str, iv: &[u8], len: usize) -> Zeroizing<Vec<u8>> {
        let hk = Hkdf::<Sha256>::new(Some(iv), self.master.as_ref());
        let mut pad = Zeroizing::new(vec![0u8; len.max(1)]);
        hk.expand(format!("secret:{name}").as_bytes(), &mut pad)
            .expect("secrets are far below the HKDF expansion limit");
        pad
    }

    fn persist(&self) -> Result<(), KeystoreError> {
        let bytes = serde_json::to_vec(&self.image).expect("secrets image serializes");
        let tmp = self.path.with_extension("tmp");
        fs::write(&tmp, &bytes)?;
        fs::rename(&tmp, &self.path)?;
        restrict_permissions(&self.path);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seal::{init_device_seal, SealOptions};

    fn fresh_seal(dir: &std::path::Path) -> DeviceSeal {
        let opts = SealOptions::emulated(dir.join("device.secret"));
        init_device_seal(dir.join("state"), &opts).unwrap()
    }

    #[test]
    fn round_trips_values() {
        let dir = tempfile::tempdir().unwrap();
        let seal = fresh_seal(dir.path());
        let mut secrets = SecretsFile::open(&seal).unwrap();
        secrets.seal_secret("db", b"database password").unwrap();
        assert_eq!(
            &*secrets.unseal_secret("db").unwrap(),
            b"database password"
        );
    }

    #[test]
    fn equal_values_produce_distinct_entries_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let seal = fresh_seal(dir.path());
        let mut secrets = SecretsFile::open(&seal).unwrap();
        secrets.seal_secret("a", b"same value").unwrap();
        secrets.seal_secret("b", b"same value").unwrap();
        let a = &secrets.image.entries["a"];
        let b = &secrets.image.entries["b"];
        assert_ne!(a.data, b.data);
        assert_ne!(a.iv, b.iv);
    }

    #[test]
    fn unknown_name_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let seal = fresh_seal(dir.path());
        let secrets = SecretsFile::open(&seal).unwrap();
        assert!(matches!(
            secrets.unseal_secret("missing"),
            Err(KeystoreError::NotFound(_))
        ));
    }

    #[test]
    fn persists_across_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let seal = fresh_seal(dir.path());
        let mut secrets = SecretsFile::open(&seal).unwrap();
        secrets.seal_secret("db", b"value").unwrap();
        drop(secrets);

        let reopened = SecretsFile::open(&seal).unwrap();
        assert_eq!(&*reopened.unseal_secret("db").unwrap(), b"value");
    }
}
