//! Password storage: memory-hard salted KDF with fixed cost parameters.

use argon2::password_hash::rand_core::OsRng;
use argon2::password_hash::{PasswordHash, PasswordHasher, PasswordVerifier, SaltString};
use argon2::{Algorithm, Argon2, Params, Version};
use serde::{Deserialize, Serialize};

/// 19 MiB memory, 2 iterations, 1 lane. Documented, deliberately fixed.
fn kdf() -> Argon2<'static> {
    let params = Params::new(19 * 1024, 2, 1, None).expect("static argon2 params");
    Argon2::new(Algorithm::Argon2id, Version::V0x13, params)
}

/// Self-describing digest string carrying kdf id, salt, and cost parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PasswordRecord {
    phc: String,
}

impl PasswordRecord {
    pub fn kdf_id(&self) -> &str {
        "argon2id"
    }
}

pub fn hash_password(password: &str) -> PasswordRecord {
    let salt = SaltString::generate(&mut OsRng);
    let hash = kdf()
        .hash_password(password.as_bytes(), &salt)
        .expect("argon2 hashing is infallible for valid params");
    PasswordRecord {
        phc: hash.to_string(),
    }
}

/// Constant-time digest comparison.
pub fn verify_password(record: &PasswordRecord, password: &str) -> bool {
    let Ok(parsed) = PasswordHash::new(&record.phc) else {
        return false;
    };
    kdf().verify_password(password.as_bytes(), &parsed).is_ok()
}
