//! Internal certificate authority: Ed25519 issuance, chain verification
//! with revocation, and challenge-response device authentication.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::RngCore;
use rcgen::{
    BasicConstraints, CertificateParams, DistinguishedName, DnType, IsCa, Issuer, KeyPair,
    SerialNumber, SubjectPublicKeyInfo, PKCS_ED25519,
};
use ring::signature::{UnparsedPublicKey, ED25519};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use time::OffsetDateTime;
use x509_parser::prelude::{FromDer, X509Certificate};

use super::challenge::{ChallengeHandle, ChallengeRecord, DeviceSession};
use super::keystore::{Keystore, KeystoreError};
use crate::events::{EventDraft, EventKind, EventSink};

const KS_CA_KEY: &str = "ca.key";
const KS_CA_CERT: &str = "ca.cert";
const KS_CA_STATE: &str = "ca.state";

const CHALLENGE_TTL_SECS: i64 = 60;
const DEVICE_SESSION_TTL_SECS: i64 = 3600;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainError {
    UnknownIssuer,
    Expired,
    NotYetValid,
    Revoked,
    BadSignature,
    Malformed,
}

impl ChainError {
    pub fn code(&self) -> &'static str {
        match self {
            ChainError::UnknownIssuer => "UNKNOWN_ISSUER",
            ChainError::Expired => "EXPIRED",
            ChainError::NotYetValid => "NOT_YET_VALID",
            ChainError::Revoked => "REVOKED",
            ChainError::BadSignature => "BAD_SIGNATURE",
            ChainError::Malformed => "MALFORMED",
        }
    }
}

#[derive(Debug, Error)]
pub enum PkiError {
    #[error("certificate authority already initialized")]
    CaExists,
    #[error("no certificate authority initialized")]
    NoCa,
    #[error("device id already enrolled")]
    DuplicateDevice,
    #[error("public key is not a well-formed SubjectPublicKeyInfo")]
    MalformedKey,
    #[error("unknown device")]
    UnknownDevice,
    #[error("device revoked")]
    DeviceRevoked,
    #[error("serial was never issued")]
    UnknownSerial,
    #[error("challenge expired or unknown")]
    ChallengeExpired,
    #[error("challenge already used")]
    ChallengeReused,
    #[error("signature does not verify")]
    BadSignature,
    #[error("certificate chain invalid: {}", .0.code())]
    Chain(ChainError),
    #[error(transparent)]
    Keystore(#[from] KeystoreError),
    #[error("certificate generation failed: {0}")]
    Generation(String),
}

impl PkiError {
    pub fn code(&self) -> &'static str {
        match self {
            PkiError::CaExists => "CA_EXISTS",
            PkiError::NoCa => "NO_CA",
            PkiError::DuplicateDevice => "DUPLICATE_DEVICE",
            PkiError::MalformedKey => "MALFORMED_KEY",
            PkiError::UnknownDevice => "UNKNOWN_DEVICE",
            PkiError::DeviceRevoked => "DEVICE_REVOKED",
            PkiError::UnknownSerial => "UNKNOWN_SERIAL",
            PkiError::ChallengeExpired => "CHALLENGE_EXPIRED",
            PkiError::ChallengeReused => "CHALLENGE_REUSED",
            PkiError::BadSignature => "BAD_SIGNATURE",
            PkiError::Chain(c) => c.code(),
            PkiError::Keystore(_) => "KEYSTORE_ERROR",
            PkiError::Generation(_) => "GENERATION_FAILED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeviceStatus {
    Active,
    Revoked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceIdentity {
    pub device_id: String,
    pub certificate_pem: String,
    pub serial: u64,
    pub enrolled_at: i64,
    pub status: DeviceStatus,
}

/// What chain verification learned from a valid certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct CertInfo {
    pub subject_cn: String,
    pub serial: u64,
    pub not_before: i64,
    pub not_after: i64,
}

/// Durable CA bookkeeping, sealed into the keystore as one entry.
#[derive(Debug, Default, Serialize, Deserialize)]
struct CaBook {
    serial_counter: u64,
    revoked: HashMap<u64, RevocationEntry>,
    devices: HashMap<String, DeviceIdentity>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RevocationEntry {
    revoked_at: i64,
    reason: String,
}

struct CaInner {
    issuer: Issuer<'static, KeyPair>,
    ca_cert_pem: String,
    ca_cert_der: Vec<u8>,
    book: CaBook,
    challenges: HashMap<String, ChallengeRecord>,
    sessions: HashMap<String, DeviceSession>,
}

/// The PKI service. Serial allocation and challenge consumption are atomic
/// under one lock; the CA private key lives only inside the keystore and
/// this process's issuer handle.
pub struct CertAuthority {
    keystore: Arc<Keystore>,
    sink: Arc<dyn EventSink>,
    inner: Mutex<Option<CaInner>>,
}

fn random_hex(bytes: usize) -> String {
    let mut buf = vec![0u8; bytes];
    rand::rngs::OsRng.fill_bytes(&mut buf);
    hex::encode(buf)
}

fn unix_to_time(ts: i64) -> OffsetDateTime {
    OffsetDateTime::from_unix_timestamp(ts).expect("timestamp in range")
}

fn serial_from_raw(raw: &[u8]) -> u64 {
    raw.iter()
        .fold(0u64, |acc, &b| acc.wrapping_shl(8) | b as u64)
}

impl CertAuthority {
    /// Opens the service, restoring CA state from the keystore when present.
    pub fn open(keystore: Arc<Keystore>, sink: Arc<dyn EventSink>) -> Result<Self, PkiError> {
        let inner = match (keystore.get(KS_CA_KEY), keystore.get(KS_CA_CERT)) {
            (Some(key_pem), Some(cert_pem)) => {
                let key_pem = String::from_utf8(key_pem)
                    .map_err(|_| PkiError::Generation("stored CA key not UTF-8".into()))?;
                let cert_pem = String::from_utf8(cert_pem)
                    .map_err(|_| PkiError::Generation("stored CA cert not UTF-8".into()))?;
                let key_pair =
                    KeyPair::from_pem(&key_pem).map_err(|e| PkiError::Generation(e.to_string()))?;
                let issuer = Issuer::from_ca_cert_pem(&cert_pem, key_pair)
                    .map_err(|e| PkiError::Generation(e.to_string()))?;
                let ca_cert_der = pem::parse(&cert_pem)
                    .map_err(|e| PkiError::Generation(e.to_string()))?
                    .into_contents();
                let book = match keystore.get(KS_CA_STATE) {
                    Some(raw) => serde_json::from_slice(&raw)
                        .map_err(|e| PkiError::Generation(format!("CA state corrupt: {e}")))?,
                    None => CaBook::default(),
                };
                Some(CaInner {
                    issuer,
                    ca_cert_pem: cert_pem,
                    ca_cert_der,
                    book,
                    challenges: HashMap::new(),
                    sessions: HashMap::new(),
                })
            }
            _ => None,
        };
        Ok(CertAuthority {
            keystore,
            sink,
            inner: Mutex::new(inner),
        })
    }

    /// Generates a self-signed CA. Re-init without `overwrite` is an error.
    pub fn init_ca(
        &self,
        subject_name: &str,
        validity_years: u32,
        overwrite: bool,
        now: i64,
    ) -> Result<String, PkiError> {
        let mut guard = self.inner.lock().expect("pki lock");
        if guard.is_some() && !overwrite {
            return Err(PkiError::CaExists);
        }

        let key_pair = KeyPair::generate_for(&PKCS_ED25519)
            .map_err(|e| PkiError::Generation(e.to_string()))?;
        let mut params = CertificateParams::default();
        let mut dn = DistinguishedName::new();
        dn.push(DnType::CommonName, subject_name);
        params.distinguished_name = dn;
        params.is_ca = IsCa::Ca(BasicConstraints::Constrained(0));
        params.not_before = unix_to_time(now);
        params.not_after = unix_to_time(now + validity_years as i64 * 365 * 86_400);
        let cert = params
            .self_signed(&key_pair)
            .map_err(|e| PkiError::Generation(e.to_string()))?;
        let cert_pem = cert.pem();
        let cert_der = cert.der().to_vec();

        self.keystore
            .put(KS_CA_KEY, key_pair.serialize_pem().as_bytes())?;
        self.keystore.put(KS_CA_CERT, cert_pem.as_bytes())?;
        self.keystore.put(
            KS_CA_STATE,
            &serde_json::to_vec(&CaBook::default()).expect("serialize"),
        )?;

        *guard = Some(CaInner {
            issuer: Issuer::new(params, key_pair),
            ca_cert_pem: cert_pem.clone(),
            ca_cert_der: cert_der,
            book: CaBook::default(),
            challenges: HashMap::new(),
            sessions: HashMap::new(),
        });
        Ok(cert_pem)
    }

    pub fn ca_cert_pem(&self) -> Result<String, PkiError> {
        let guard = self.inner.lock().expect("pki lock");
        guard
            .as_ref()
            .map(|ca| ca.ca_cert_pem.clone())
            .ok_or(PkiError::NoCa)
    }

    pub fn device(&self, device_id: &str) -> Option<DeviceIdentity> {
        let guard = self.inner.lock().expect("pki lock");
        guard.as_ref()?.book.devices.get(device_id).cloned()
    }

    /// Issues a device certificate over a client-supplied public key.
    pub fn enroll_device(
        &self,
        device_id: &str,
        public_key_pem: &str,
        validity_days: u32,
        now: i64,
    ) -> Result<DeviceIdentity, PkiError> {
        let mut guard = self.inner.lock().expect("pki lock");
        let ca = guard.as_mut().ok_or(PkiError::NoCa)?;
        if ca.book.devices.contains_key(device_id) {
            return Err(PkiError::DuplicateDevice);
        }
        let spki =
            SubjectPublicKeyInfo::from_pem(public_key_pem).map_err(|_| PkiError::MalformedKey)?;

        let serial = ca.book.serial_counter + 1;
        let mut params = CertificateParams::default();
        let mut dn = DistinguishedName::new();
        dn.push(DnType::CommonName, device_id);
        params.distinguished_name = dn;
        params.is_ca = IsCa::ExplicitNoCa;
        params.serial_number = Some(SerialNumber::from_slice(&serial.to_be_bytes()));
        params.not_before = unix_to_time(now);
        params.not_after = unix_to_time(now + validity_days as i64 * 86_400);
        let cert = params
            .signed_by(&spki, &ca.issuer)
            .map_err(|e| PkiError::Generation(e.to_string()))?;

        let identity = DeviceIdentity {
            device_id: device_id.to_string(),
            certificate_pem: cert.pem(),
            serial,
            enrolled_at: now,
            status: DeviceStatus::Active,
        };
        ca.book.serial_counter = serial;
        ca.book
            .devices
            .insert(device_id.to_string(), identity.clone());
        let book = serde_json::to_vec(&ca.book).expect("serialize");
        drop(guard);
        self.keystore.put(KS_CA_STATE, &book)?;
        let _ = self.sink.emit(
            EventDraft::new(EventKind::DeviceEnrolled, device_id, now)
                .detail("serial", serial.to_string()),
        );
        Ok(identity)
    }

    /// Full chain verification: issuer, signature, validity window,
    /// revocation, subject shape.
    pub fn verify_cert_chain(&self, cert_pem: &str, now: i64) -> Result<CertInfo, ChainError> {
        let guard = self.inner.lock().expect("pki lock");
        let ca = guard.as_ref().ok_or(ChainError::UnknownIssuer)?;
        verify_chain_inner(ca, cert_pem, now)
    }

    /// Starts device authentication with a fresh single-use nonce.
    pub fn create_challenge(&self, device_id: &str, now: i64) -> Result<ChallengeHandle, PkiError> {
        let mut guard = self.inner.lock().expect("pki lock");
        let ca = guard.as_mut().ok_or(PkiError::NoCa)?;
        match ca.book.devices.get(device_id) {
            None => return Err(PkiError::UnknownDevice),
            Some(d) if d.status == DeviceStatus::Revoked => return Err(PkiError::DeviceRevoked),
            Some(_) => {}
        }
        let mut nonce = [0u8; 32];
        rand::rngs::OsRng.fill_bytes(&mut nonce);
        let challenge_id = random_hex(16);
        let expires_at = now + CHALLENGE_TTL_SECS;
        ca.challenges.insert(
            challenge_id.clone(),
            ChallengeRecord {
                device_id: device_id.to_string(),
                nonce,
                expires_at,
                used: false,
            },
        );
        Ok(ChallengeHandle {
            challenge_id,
            nonce: nonce.to_vec(),
            expires_at,
        })
    }

    /// Completes device authentication. Any verification attempt consumes
    /// the challenge, so a replay fails even with a valid signature.
    pub fn verify_challenge_response(
        &self,
        challenge_id: &str,
        signature: &[u8],
        now: i64,
    ) -> Result<DeviceSession, PkiError> {
        let mut guard = self.inner.lock().expect("pki lock");
        let ca = guard.as_mut().ok_or(PkiError::NoCa)?;

        let (device_id, nonce, verdict) = match ca.challenges.get_mut(challenge_id) {
            None => (
                "unknown".to_string(),
                None,
                Some(PkiError::ChallengeExpired),
            ),
            Some(c) if c.used => (c.device_id.clone(), None, Some(PkiError::ChallengeReused)),
            Some(c) => {
                c.used = true;
                if now > c.expires_at {
                    (c.device_id.clone(), None, Some(PkiError::ChallengeExpired))
                } else {
                    (c.device_id.clone(), Some(c.nonce), None)
                }
            }
        };

        let result = match verdict {
            Some(err) => Err(err),
            None => {
                let nonce = nonce.expect("nonce present when no verdict");
                let device = ca
                    .book
                    .devices
                    .get(&device_id)
                    .ok_or(PkiError::UnknownDevice)?;
                match verify_chain_inner(ca, &device.certificate_pem, now) {
                    Err(reason) => Err(PkiError::Chain(reason)),
                    Ok(_) => {
                        let spki_ok = device_public_key(&device.certificate_pem)
                            .map(|key| {
                                UnparsedPublicKey::new(&ED25519, key)
                                    .verify(&nonce, signature)
                                    .is_ok()
                            })
                            .unwrap_or(false);
                        if spki_ok {
                            let token = random_hex(32);
                            let session = DeviceSession {
                                token: token.clone(),
                                device_id: device_id.clone(),
                                issued_at: now,
                                expires_at: now + DEVICE_SESSION_TTL_SECS,
                            };
                            ca.sessions.insert(token, session.clone());
                            Ok(session)
                        } else {
                            Err(PkiError::BadSignature)
                        }
                    }
                }
            }
        };

        drop(guard);
        match &result {
            Ok(_) => {
                let _ = self.sink.emit(EventDraft::new(
                    EventKind::DeviceAuthSuccess,
                    &device_id,
                    now,
                ));
            }
            Err(e) => {
                let _ = self.sink.emit(
                    EventDraft::new(EventKind::DeviceAuthFailure, &device_id, now)
                        .detail("reason", e.code()),
                );
            }
        }
        result
    }

    pub fn validate_device_session(&self, token: &str, now: i64) -> Option<DeviceSession> {
        let guard = self.inner.lock().expect("pki lock");
        guard
            .as_ref()?
            .sessions
            .get(token)
            .filter(|s| now < s.expires_at)
            .cloned()
    }

    /// Revocation is immediate for all subsequent verifications.
    pub fn revoke(&self, serial: u64, reason: &str, now: i64) -> Result<(), PkiError> {
        let mut guard = self.inner.lock().expect("pki lock");
        let ca = guard.as_mut().ok_or(PkiError::NoCa)?;
        if serial == 0 || serial > ca.book.serial_counter {
            return Err(PkiError::UnknownSerial);
        }
        ca.book.revoked.insert(
            serial,
            RevocationEntry {
                revoked_at: now,
                reason: reason.to_string(),
            },
        );
        for device in ca.book.devices.values_mut() {
            if device.serial == serial {
                device.status = DeviceStatus::Revoked;
            }
        }
        let book = serde_json::to_vec(&ca.book).expect("serialize");
        drop(guard);
        self.keystore.put(KS_CA_STATE, &book)?;
        Ok(())
    }
}

/// Self-signed TLS server certificate for the gateway listener; returns
/// (certificate PEM, private key PEM).
pub fn generate_self_signed_server_cert(
    common_name: &str,
    sans: &[&str],
    now: i64,
    validity_days: u32,
) -> Result<(String, String), PkiError> {
    let key_pair =
        KeyPair::generate_for(&PKCS_ED25519).map_err(|e| PkiError::Generation(e.to_string()))?;
    let mut params = CertificateParams::new(sans.iter().map(|s| s.to_string()).collect::<Vec<_>>())
        .map_err(|e| PkiError::Generation(e.to_string()))?;
    let mut dn = DistinguishedName::new();
    dn.push(DnType::CommonName, common_name);
    params.distinguished_name = dn;
    params.not_before = unix_to_time(now);
    params.not_after = unix_to_time(now + validity_days as i64 * 86_400);
    let cert = params
        .self_signed(&key_pair)
        .map_err(|e| PkiError::Generation(e.to_string()))?;
    Ok((cert.pem(), key_pair.serialize_pem()))
}

fn device_public_key(cert_pem: &str) -> Option<Vec<u8>> {
    let der = pem::parse(cert_pem).ok()?.into_contents();
    let (_, cert) = X509Certificate::from_der(&der).ok()?;
    Some(cert.public_key().subject_public_key.data.to_vec())
}

fn verify_chain_inner(ca: &CaInner, cert_pem: &str, now: i64) -> Result<CertInfo, ChainError> {
    let der = pem::parse(cert_pem)
        .map_err(|_| ChainError::Malformed)?
        .into_contents();
    let (_, cert) = X509Certificate::from_der(&der).map_err(|_| ChainError::Malformed)?;
    let (_, ca_cert) =
        X509Certificate::from_der(&ca.ca_cert_der).map_err(|_| ChainError::Malformed)?;

    if cert.issuer().as_raw() != ca_cert.subject().as_raw() {
        return Err(ChainError::UnknownIssuer);
    }
    if cert.verify_signature(Some(ca_cert.public_key())).is_err() {
        return Err(ChainError::BadSignature);
    }
    let not_before = cert.validity().not_before.timestamp();
    let not_after = cert.validity().not_after.timestamp();
    if now < not_before {
        return Err(ChainError::NotYetValid);
    }
    if now > not_after {
        return Err(ChainError::Expired);
    }
    let serial = serial_from_raw(cert.raw_serial());
    if ca.book.revoked.contains_key(&serial) {
        return Err(ChainError::Revoked);
    }
    let subject_cn = cert
        .subject()
        .iter_common_name()
        .next()
        .and_then(|cn| cn.as_str().ok())
        .ok_or(ChainError::Malformed)?
        .to_string();
    Ok(CertInfo {
        subject_cn,
        serial,
        not_before,
        not_after,
    })
}
