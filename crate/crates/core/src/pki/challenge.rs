//! Challenge-response protocol types.

#[derive(Debug, Clone)]
pub struct ChallengeHandle {
    pub challenge_id: String,
    /// 32 random bytes the device must sign.
    pub nonce: Vec<u8>,
    pub expires_at: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSession {
    pub token: String,
    pub device_id: String,
    pub issued_at: i64,
    pub expires_at: i64,
}

pub(super) struct ChallengeRecord {
    pub device_id: String,
    pub nonce: [u8; 32],
    pub expires_at: i64,
    pub used: bool,
}
