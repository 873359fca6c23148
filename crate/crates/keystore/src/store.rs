//! The encrypted key database.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::sync::RwLock;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use aes_gcm::aead::Aead;
use aes_gcm::{Aes256Gcm, KeyInit, Nonce};
use hkdf::Hkdf;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use zeroize::Zeroizing;

use keymesh_core::{KeyBlock, SaeId};

use crate::seal::{b64, restrict_permissions, unb64, DeviceSeal};
use crate::secrets::SecretsFile;
use crate::KeystoreError;

const STORE_FILE: &str = "keystore.db";
const STORE_PASSWORD_SECRET: &str = "store-password";
const FIELD_SECRET: &str = "field-secret";

/// Keys retained after delivery are dropped after this long unless voided
/// earlier.
pub const DEFAULT_RETENTION: Duration = Duration::from_secs(24 * 60 * 60);

/// Which logical database a key lives in: keys in transit / relayed to this
/// node, or keys read from the local southbound interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Namespace {
    Relayed,
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyState {
    Available,
    Delivered,
    Voided,
}

#[derive(Serialize, Deserialize, Clone)]
struct StoredKeyRecord {
    key_id: String,
    namespace: Namespace,
    owner_master_sae_id: SaeId,
    target_sae_ids: Vec<SaeId>,
    size_bits: u32,
    /// Key material XOR per-key field pad; empty once voided.
    field_ciphertext: String,
    state: KeyState,
    stored_at_unix: u64,
}

#[derive(Serialize, Deserialize, Default)]
struct StoreImage {
    version: String,
    keys: BTreeMap<String, StoredKeyRecord>,
}

/// Metadata snapshot of one stored key.
#[derive(Debug, Clone)]
pub struct StoredKeyMeta {
    pub key_id: String,
    pub namespace: Namespace,
    pub owner_master_sae_id: SaeId,
    pub target_sae_ids: Vec<SaeId>,
    pub state: KeyState,
}

/// Single-file encrypted key database. All mutations are serialized through
/// one writer lock and persisted before returning.
pub struct KeyStore {
    path: PathBuf,
    store_key: Zeroizing<[u8; 32]>,
    field_secret: Zeroizing<Vec<u8>>,
    image: RwLock<StoreImage>,
    retention: Duration,
}

impl KeyStore {
    pub fn open(seal: &DeviceSeal) -> Result<Self, KeystoreError> {
        Self::open_with_retention(seal, DEFAULT_RETENTION)
    }

    pub fn open_with_retention(
        seal: &DeviceSeal,
        retention: Duration,
    ) -> Result<Self, KeystoreError> {
        let mut secrets = SecretsFile::open(seal)?;
        let password = secrets.get_or_create(STORE_PASSWORD_SECRET, 32)?;
        let field_secret = secrets.get_or_create(FIELD_SECRET, 32)?;

        let hk = Hkdf::<Sha256>::new(None, &password);
        let mut store_key = Zeroizing::new([0u8; 32]);
        hk.expand(b"store-v1", store_key.as_mut())
            .expect("32 bytes is a valid HKDF output length");

        let path = seal.state_dir().join(STORE_FILE);
        let image = if path.exists() {
            Self::read_image(&path, &store_key)?
        } else {
            StoreImage {
                version: "v1".into(),
                keys: BTreeMap::new(),
            }
        };

        Ok(Self {
            path,
            store_key,
            field_secret,
            image: RwLock::new(image),
            retention,
        })
    }

    pub fn put_key(
        &self,
        namespace: Namespace,
        key: &KeyBlock,
        owner: &SaeId,
        targets: &[SaeId],
    ) -> Result<(), KeystoreError> {
        let mut image = self.image.write().expect("store lock");
        Self::sweep(&mut image, self.retention);
        let slot = record_key(namespace, &key.key_id);
        if image.keys.contains_key(&slot) {
            return Err(KeystoreError::DuplicateKeyId(key.key_id.clone()));
        }
        let field_ciphertext = self.field_xor(&key.key_id, &key.key_material);
        image.keys.insert(
            slot,
            StoredKeyRecord {
                key_id: key.key_id.clone(),
                namespace,
                owner_master_sae_id: owner.clone(),
                target_sae_ids: targets.to_vec(),
                size_bits: key.size_bits,
                field_ciphertext: b64(&field_ciphertext),
                state: KeyState::Available,
                stored_at_unix: unix_now(),
            },
        );
        self.persist(&image)
    }

    /// Returns the key iff it is present, not voided, and `requester` is one
    /// of its targets; marks it delivered. Delivered keys stay retrievable
    /// until voided or expired.
    pub fn get_key(
        &self,
        namespace: Namespace,
        key_id: &str,
        requester: &SaeId,
    ) -> Result<KeyBlock, KeystoreError> {
        let mut image = self.image.write().expect("store lock");
        Self::sweep(&mut image, self.retention);
        let record = image
            .keys
            .get_mut(&record_key(namespace, key_id))
            .ok_or_else(|| KeystoreError::KeyNotPresent(key_id.to_string()))?;
        if record.state == KeyState::Voided {
            return Err(KeystoreError::Voided(key_id.to_string()));
        }
        if !record.target_sae_ids.contains(requester) {
            return Err(KeystoreError::Unauthorized {
                key_id: key_id.to_string(),
                requester: requester.to_string(),
            });
        }
        let field_ciphertext = unb64("field_ciphertext", &record.field_ciphertext)?;
        let material = self.field_xor(key_id, &field_ciphertext);
        let delivered = record.state == KeyState::Available;
        if delivered {
            record.state = KeyState::Delivered;
        }
        let block = KeyBlock::new(key_id.to_string(), material)
            .map_err(|e| KeystoreError::Corrupt(e.to_string()))?;
        if delivered {
            self.persist(&image)?;
        }
        Ok(block)
    }

    /// Voids a key: its material is erased and later reads fail. Voiding an
    /// already-voided key is an idempotent ok.
    pub fn void_key(&self, namespace: Namespace, key_id: &str) -> Result<(), KeystoreError> {
        let mut image = self.image.write().expect("store lock");
        let record = image
            .keys
            .get_mut(&record_key(namespace, key_id))
            .ok_or_else(|| KeystoreError::KeyNotPresent(key_id.to_string()))?;
        if record.state == KeyState::Voided {
            return Ok(());
        }
        record.state = KeyState::Voided;
        record.field_ciphertext = String::new();
        self.persist(&image)
    }

    pub fn meta(&self, namespace: Namespace, key_id: &str) -> Option<StoredKeyMeta> {
        let image = self.image.read().expect("store lock");
        image
            .keys
            .get(&record_key(namespace, key_id))
            .map(|r| StoredKeyMeta {
                key_id: r.key_id.clone(),
                namespace: r.namespace,
                owner_master_sae_id: r.owner_master_sae_id.clone(),
                target_sae_ids: r.target_sae_ids.clone(),
                state: r.state,
            })
    }

    pub fn len(&self) -> usize {
        self.image.read().expect("store lock").keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn field_xor(&self, key_id: &str, data: &[u8]) -> Vec<u8> {
        let hk = Hkdf::<Sha256>::new(None, &self.field_secret);
        let mut pad = Zeroizing::new(vec![0u8; data.len().max(1)]);
        hk.expand(format!("field:{key_id}").as_bytes(), &mut pad)
            .expect("key material is far below the HKDF expansion limit");
        data.iter().zip(pad.iter()).map(|(d, p)| d ^ p).collect()
    }

    fn sweep(image: &mut StoreImage, retention: Duration) {
        let cutoff = unix_now().saturating_sub(retention.as_secs());
        image.keys.retain(|_, record| {
            record.state != KeyState::Delivered || record.stored_at_unix >= cutoff
        });
    }

    fn read_image(
        path: &PathBuf,
        store_key: &[u8; 32],
    ) -> Result<StoreImage, KeystoreError> {
        let raw = fs::read(path)?;
        if raw.len() < 12 {
            return Err(KeystoreError::Corrupt("store file too short".into()));
        }
        let mut iv = [0u8; 12];
        iv.copy_from_slice(&raw[..12]);
        let cipher = Aes256Gcm::new(store_key.into());
        let plaintext = cipher
            .decrypt(&Nonce::from(iv), &raw[12..])
            .map_err(|_| KeystoreError::SealMismatch)?;
        serde_json::from_slice(&plaintext)
            .map_err(|e| KeystoreError::Corrupt(format!("store image: {e}")))
    }

    fn persist(&self, image: &StoreImage) -> Result<(), KeystoreError> {
        let plaintext = Zeroizing::new(
            serde_json::to_vec(image).expect("store image serializes"),
        );
        let mut iv = [0u8; 12];
        rand::rng().fill_bytes(&mut iv);
        let cipher = Aes256Gcm::new((&*self.store_key).into());
        let ciphertext = cipher
            .encrypt(&Nonce::from(iv), plaintext.as_slice())
            .expect("in-memory encryption");

        let mut raw = Vec::with_capacity(12 + ciphertext.len());
        raw.extend_from_slice(&iv);
        raw.extend_from_slice(&ciphertext);
        let tmp = self.path.with_extension("tmp");
        fs::write(&tmp, &raw)?;
        fs::rename(&tmp, &self.path)?;
        restrict_permissions(&self.path);
        Ok(())
    }
}

fn record_key(namespace: Namespace, key_id: &str) -> String {
    match namespace {
        Namespace::Relayed => format!("relayed/{key_id}"),
        Namespace::Local => format!("local/{key_id}"),
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .expect("clock after epoch")
        .as_secs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seal::{init_device_seal, SealOptions};

    fn open_store(dir: &std::path::Path) -> KeyStore {
        let opts = SealOptions::emulated(dir.join("device.secret"));
        let seal = init_device_seal(dir.join("state"), &opts).unwrap();
        KeyStore::open(&seal).unwrap()
    }

    fn sae(id: &str) -> SaeId {
        SaeId::new(id).unwrap()
    }

    fn block(material: Vec<u8>) -> KeyBlock {
        KeyBlock::new(uuid::Uuid::new_v4().to_string(), material).unwrap()
    }

    #[test]
    fn put_get_round_trip_marks_delivered() {
        let dir = tempfile::tempdir().unwrap();
        let store = open_store(dir.path());
        let key = block(vec![0xAB; 32]);
        store
            .put_key(Namespace::Relayed, &key, &sae("qkd-a"), &[sae("sae-8")])
            .unwrap();

        let fetched = store
            .get_key(Namespace::Relayed, &key.key_id, &sae("sae-8"))
            .unwrap();
        assert_eq!(fetched, key);
        assert_eq!(
            store.meta(Namespace::Relayed, &key.key_id).unwrap().state,
            KeyState::Delivered
        );

        // Reads before voiding stay identical.
        let again = store
            .get_key(Namespace::Relayed, &key.key_id, &sae("sae-8"))
            .unwrap();
        assert_eq!(again, key);
    }

    #[test]
    fn duplicate_put_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = open_store(dir.path());
        let key = block(vec![1; 16]);
        store
            .put_key(Namespace::Relayed, &key, &sae("o"), &[sae("t")])
            .unwrap();
        assert!(matches!(
            store.put_key(Namespace::Relayed, &key, &sae("o"), &[sae("t")]),
            Err(KeystoreError::DuplicateKeyId(_))
        ));
    }

    #[test]
    fn unauthorized_requester_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = open_store(dir.path());
        let key = block(vec![2; 16]);
        store
            .put_key(Namespace::Relayed, &key, &sae("o"), &[sae("sae-8")])
            .unwrap();
        assert!(matches!(
            store.get_key(Namespace::Relayed, &key.key_id, &sae("intruder")),
            Err(KeystoreError::Unauthorized { .. })
        ));
    }

    #[test]
    fn void_state_machine() {
        let dir = tempfile::tempdir().unwrap();
        let store = open_store(dir.path());
        let key = block(vec![3; 16]);
        store
            .put_key(Namespace::Relayed, &key, &sae("o"), &[sae("t")])
            .unwrap();

        store.void_key(Namespace::Relayed, &key.key_id).unwrap();
        assert!(matches!(
            store.get_key(Namespace::Relayed, &key.key_id, &sae("t")),
            Err(KeystoreError::Voided(_))
        ));
        // Idempotent second void.
        store.void_key(Namespace::Relayed, &key.key_id).unwrap();
        // Unknown id is a distinct error.
        assert!(matches!(
            store.void_key(Namespace::Relayed, &uuid::Uuid::new_v4().to_string()),
            Err(KeystoreError::KeyNotPresent(_))
        ));
    }

    #[test]
    fn namespaces_are_disjoint() {
        let dir = tempfile::tempdir().unwrap();
        let store = open_store(dir.path());
        let key = block(vec![4; 16]);
        store
            .put_key(Namespace::Relayed, &key, &sae("o"), &[sae("t")])
            .unwrap();
        assert!(matches!(
            store.get_key(Namespace::Local, &key.key_id, &sae("t")),
            Err(KeystoreError::KeyNotPresent(_))
        ));
        // Same id may exist in the other namespace.
        store
            .put_key(Namespace::Local, &key, &sae("o"), &[sae("t")])
            .unwrap();
    }

    #[test]
    fn durable_across_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let opts = SealOptions::emulated(dir.path().join("device.secret"));
        let key = block((0u8..32).collect());
        {
            let seal = init_device_seal(dir.path().join("state"), &opts).unwrap();
            let store = KeyStore::open(&seal).unwrap();
            store
                .put_key(Namespace::Relayed, &key, &sae("o"), &[sae("t")])
                .unwrap();
        }
        let seal = init_device_seal(dir.path().join("state"), &opts).unwrap();
        let store = KeyStore::open(&seal).unwrap();
        assert_eq!(
            store
                .get_key(Namespace::Relayed, &key.key_id, &sae("t"))
                .unwrap(),
            key
        );
    }

    #[test]
    fn persisted_files_never_contain_plaintext_key_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let store = open_store(dir.path());
        let mut keys = Vec::new();
        for i in 0..20 {
            let key = block((0..32).map(|j| (i * 32 + j) as u8 ^ 0x5A).collect());
            store
                .put_key(Namespace::Relayed, &key, &sae("o"), &[sae("t")])
                .unwrap();
            keys.push(key);
        }
        drop(store);

        let mut haystack = Vec::new();
        for entry in walk_files(&dir.path().join("state")) {
            haystack.extend(fs::read(entry).unwrap());
        }
        for key in &keys {
            assert!(
                find_subslice(&haystack, &key.key_material).is_none(),
                "plaintext key material found in persisted files"
            );
        }
    }

    fn walk_files(dir: &std::path::Path) -> Vec<PathBuf> {
        let mut files = Vec::new();
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                files.extend(walk_files(&path));
            } else {
                files.push(path);
            }
        }
        files
    }

    fn find_subslice(haystack: &[u8], needle: &[u8]) -> Option<usize> {
        haystack
            .windows(needle.len())
            .position(|window| window == needle)
    }
}
