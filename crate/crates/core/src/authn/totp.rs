//! Time-based one-time passwords: HMAC-SHA-1 over the step counter with
//! dynamic truncation.

use hmac::{Hmac, Mac};
use sha1::Sha1;

pub const TOTP_STEP_SECS: i64 = 30;
pub const TOTP_DIGITS: u32 = 6;

/// Computes the code for the window containing `t`. `digits` must be 6 or 8.
pub fn totp_code(secret: &[u8], t: i64, step: i64, digits: u32) -> String {
    assert!(digits == 6 || digits == 8, "digits must be 6 or 8");
    assert!(step > 0, "step must be positive");
    let counter = t.div_euclid(step) as u64;
    hotp(secret, counter, digits)
}

fn hotp(secret: &[u8], counter: u64, digits: u32) -> String {
    let mut mac = Hmac::<Sha1>::new_from_slice(secret).expect("hmac accepts any key length");
    mac.update(&counter.to_be_bytes());
    let digest = mac.finalize().into_bytes();
    let offset = (digest[19] & 0x0f) as usize;
    let bin = u32::from_be_bytes([
        digest[offset] & 0x7f,
        digest[offset + 1],
        digest[offset + 2],
        digest[offset + 3],
    ]);
    let code = bin % 10u32.pow(digits);
    format!("{code:0width$}", width = digits as usize)
}

/// Accepts the code for the previous, current, and next window.
pub fn verify_totp_code(secret: &[u8], code: &str, now: i64, step: i64, digits: u32) -> bool {
    use subtle::ConstantTimeEq;
    let counter = now.div_euclid(step);
    let mut ok = false;
    for c in [counter - 1, counter, counter + 1] {
        if c < 0 {
            continue;
        }
        let expected = hotp(secret, c as u64, digits);
        ok |= bool::from(expected.as_bytes().ct_eq(code.as_bytes()));
    }
    ok
}

/// Standard provisioning URI consumed by authenticator apps.
pub fn provisioning_uri(issuer: &str, username: &str, secret: &[u8]) -> String {
    let encoded = base32::encode(base32::Alphabet::Rfc4648 { padding: false }, secret);
    format!(
        "otpauth://totp/{issuer}:{username}?secret={encoded}&issuer={issuer}&digits=6&period=30&algorithm=SHA1"
    )
}
