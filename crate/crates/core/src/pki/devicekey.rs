//! Client-side device keys: Ed25519 keypair generation, PEM encoding, and
//! nonce signing. Used by the CLI and by tests standing in for devices.

use ring::rand::SystemRandom;
use ring::signature::{Ed25519KeyPair, KeyPair as _};

/// DER prefix of an Ed25519 SubjectPublicKeyInfo; the 32 raw key bytes
/// follow directly.
const ED25519_SPKI_PREFIX: [u8; 12] = [
    0x30, 0x2a, 0x30, 0x05, 0x06, 0x03, 0x2b, 0x65, 0x70, 0x03, 0x21, 0x00,
];

pub struct DeviceKey {
    keypair: Ed25519KeyPair,
    pkcs8: Vec<u8>,
}

impl DeviceKey {
    pub fn generate() -> Self {
        let rng = SystemRandom::new();
        let doc = Ed25519KeyPair::generate_pkcs8(&rng).expect("ed25519 keygen");
        let keypair = Ed25519KeyPair::from_pkcs8(doc.as_ref()).expect("fresh pkcs8 parses");
        DeviceKey {
            keypair,
            pkcs8: doc.as_ref().to_vec(),
        }
    }

    pub fn from_pkcs8_pem(text: &str) -> Result<Self, String> {
        let block = pem::parse(text).map_err(|e| format!("invalid PEM: {e}"))?;
        if block.tag() != "PRIVATE KEY" {
            return Err(format!("expected PRIVATE KEY block, found {}", block.tag()));
        }
        let keypair = Ed25519KeyPair::from_pkcs8(block.contents())
            .map_err(|_| "not an Ed25519 PKCS#8 key".to_string())?;
        Ok(DeviceKey {
            keypair,
            pkcs8: block.contents().to_vec(),
        })
    }

    pub fn pkcs8_pem(&self) -> String {
        pem::encode(&pem::Pem::new("PRIVATE KEY", self.pkcs8.clone()))
    }

    /// SubjectPublicKeyInfo in PEM form, the shape enrollment expects.
    pub fn public_key_pem(&self) -> String {
        let raw = self.keypair.public_key().as_ref();
        let mut der = ED25519_SPKI_PREFIX.to_vec();
        der.extend_from_slice(raw);
        pem::encode(&pem::Pem::new("PUBLIC KEY", der))
    }

    pub fn sign(&self, message: &[u8]) -> Vec<u8> {
        self.keypair.sign(message).as_ref().to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ring::signature::{UnparsedPublicKey, ED25519};

    #[test]
    fn pem_round_trip_preserves_signatures() {
        let key = DeviceKey::generate();
        let restored = DeviceKey::from_pkcs8_pem(&key.pkcs8_pem()).unwrap();
        let sig = restored.sign(b"nonce");
        let spki = pem::parse(key.public_key_pem()).unwrap();
        let raw = &spki.contents()[ED25519_SPKI_PREFIX.len()..];
        UnparsedPublicKey::new(&ED25519, raw)
            .verify(b"nonce", &sig)
            .unwrap();
    }

    #[test]
    fn public_pem_is_wellformed_spki() {
        let key = DeviceKey::generate();
        let text = key.public_key_pem();
        assert!(text.starts_with("-----BEGIN PUBLIC KEY-----"));
        let block = pem::parse(&text).unwrap();
        assert_eq!(block.contents().len(), 44);
        assert_eq!(&block.contents()[..12], &ED25519_SPKI_PREFIX);
    }

    #[test]
    fn wrong_pem_tag_rejected() {
        let key = DeviceKey::generate();
        assert!(DeviceKey::from_pkcs8_pem(&key.public_key_pem()).is_err());
    }
}
