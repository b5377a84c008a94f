//! Sealed key-value store: a single append-compacted file of entries
//! encrypted with XChaCha20-Poly1305 under a process-start master key.
//!
//! File layout: 5-byte magic `ZTKS\x01`, then records of a big-endian u32
//! length followed by a JSON envelope {name, nonce, ciphertext} with
//! base64 binary fields. The entry name is the AEAD associated data, so a
//! ciphertext cannot be replayed under another name. Later records for a
//! name supersede earlier ones.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{XChaCha20Poly1305, XNonce};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MASTER_KEY_ENV: &str = "ZTIAM_MASTER_KEY";

const MAGIC: &[u8; 5] = b"ZTKS\x01";

#[derive(Debug, Error)]
pub enum KeystoreError {
    #[error("keystore io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a keystore file (bad magic)")]
    BadMagic,
    #[error("malformed keystore record")]
    Malformed,
    #[error("sealing failed")]
    SealFailure,
    #[error("ciphertext failed authentication")]
    IntegrityFailure,
    #[error("master key invalid: {0}")]
    BadMasterKey(String),
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    name: String,
    nonce: String,
    ciphertext: String,
}

struct Inner {
    file: File,
    entries: HashMap<String, Vec<u8>>,
}

/// Encrypted store for the CA key, TOTP secrets, and session-signing
/// material. Decryption failure is a hard error, never silent.
pub struct Keystore {
    path: PathBuf,
    cipher: XChaCha20Poly1305,
    inner: Mutex<Inner>,
}

/// Reads the base64 master key from the environment.
pub fn master_key_from_env(var: &str) -> Result<[u8; 32], KeystoreError> {
    let raw =
        std::env::var(var).map_err(|_| KeystoreError::BadMasterKey(format!("{var} not set")))?;
    let bytes = B64
        .decode(raw.trim())
        .map_err(|e| KeystoreError::BadMasterKey(format!("invalid base64: {e}")))?;
    bytes
        .try_into()
        .map_err(|_| KeystoreError::BadMasterKey("key must be 32 bytes".into()))
}

impl Keystore {
    /// Opens (or creates) the store, verifying every sealed entry under the
    /// given master key. Any undecryptable entry aborts the open.
    pub fn open(path: impl AsRef<Path>, master_key: &[u8; 32]) -> Result<Self, KeystoreError> {
        let path = path.as_ref().to_path_buf();
        let cipher = XChaCha20Poly1305::new(master_key.into());
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&path)?;
        let mut buf = Vec::new();
        file.read_to_end(&mut buf)?;

        let mut entries = HashMap::new();
        if buf.is_empty() {
            file.write_all(MAGIC)?;
        } else {
            if buf.len() < MAGIC.len() || &buf[..MAGIC.len()] != MAGIC {
                return Err(KeystoreError::BadMagic);
            }
            let mut offset = MAGIC.len();
            while offset < buf.len() {
                if buf.len() - offset < 4 {
                    return Err(KeystoreError::Malformed);
                }
                let len = u32::from_be_bytes(buf[offset..offset + 4].try_into().unwrap()) as usize;
                let body = buf
                    .get(offset + 4..offset + 4 + len)
                    .ok_or(KeystoreError::Malformed)?;
                let env: Envelope =
                    serde_json::from_slice(body).map_err(|_| KeystoreError::Malformed)?;
                let plaintext = open_envelope(&cipher, &env)?;
                entries.insert(env.name, plaintext);
                offset += 4 + len;
            }
        }

        Ok(Keystore {
            path,
            cipher,
            inner: Mutex::new(Inner { file, entries }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Seals and appends the entry; the new value supersedes any prior one.
    pub fn put(&self, name: &str, secret: &[u8]) -> Result<(), KeystoreError> {
        let mut nonce_bytes = [0u8; 24];
        rand::rngs::OsRng.fill_bytes(&mut nonce_bytes);
        let nonce = XNonce::from(nonce_bytes);
        let ciphertext = self
            .cipher
            .encrypt(
                &nonce,
                Payload {
                    msg: secret,
                    aad: name.as_bytes(),
                },
            )
            .map_err(|_| KeystoreError::SealFailure)?;
        let envelope = Envelope {
            name: name.to_string(),
            nonce: B64.encode(nonce_bytes),
            ciphertext: B64.encode(&ciphertext),
        };
        let body = serde_json::to_vec(&envelope).expect("envelope serialization");

        let mut inner = self.inner.lock().expect("keystore lock");
        inner.file.write_all(&(body.len() as u32).to_be_bytes())?;
        inner.file.write_all(&body)?;
        inner.file.sync_data()?;
        inner.entries.insert(name.to_string(), secret.to_vec());
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<Vec<u8>> {
        self.inner
            .lock()
            .expect("keystore lock")
            .entries
            .get(name)
            .cloned()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.inner
            .lock()
            .expect("keystore lock")
            .entries
            .contains_key(name)
    }
}

fn open_envelope(cipher: &XChaCha20Poly1305, env: &Envelope) -> Result<Vec<u8>, KeystoreError> {
    let nonce_bytes: [u8; 24] = B64
        .decode(&env.nonce)
        .ok()
        .and_then(|v| v.try_into().ok())
        .ok_or(KeystoreError::Malformed)?;
    let ciphertext = B64
        .decode(&env.ciphertext)
        .map_err(|_| KeystoreError::Malformed)?;
    cipher
        .decrypt(
            &XNonce::from(nonce_bytes),
            Payload {
                msg: ciphertext.as_slice(),
                aad: env.name.as_bytes(),
            },
        )
        .map_err(|_| KeystoreError::IntegrityFailure)
}
