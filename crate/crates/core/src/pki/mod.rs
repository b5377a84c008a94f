//! Device identity: internal certificate authority, challenge-response
//! device authentication, and the sealed secret store backing both.

mod ca;
mod challenge;
mod devicekey;
mod keystore;

pub use ca::{
    generate_self_signed_server_cert, CertAuthority, CertInfo, ChainError, DeviceIdentity,
    DeviceStatus, PkiError,
};
pub use challenge::{ChallengeHandle, DeviceSession};
pub use devicekey::DeviceKey;
pub use keystore::{master_key_from_env, Keystore, KeystoreError, MASTER_KEY_ENV};
