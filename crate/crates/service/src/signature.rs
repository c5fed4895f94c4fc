use hmac::{Hmac, Mac};
use sha2::Sha256;

pub const SIGNATURE_HEADER: &str = "x-hub-signature-256";

/// Checks an `X-Hub-Signature-256` value (`sha256=<hex>`; the prefix is
/// optional) against the HMAC-SHA256 of the raw body. The digest comparison
/// is constant-time.
pub fn verify_signature(raw_body: &[u8], signature_header: Option<&str>, secret: &[u8]) -> bool {
    let Some(header) = signature_header else {
        return false;
    };
    let hex_digest = header.trim();
    let hex_digest = hex_digest.strip_prefix("sha256=").unwrap_or(hex_digest);
    let Ok(expected) = hex::decode(hex_digest) else {
        return false;
    };
    let mut mac = Hmac::<Sha256>::new_from_slice(secret).expect("HMAC accepts any key length");
    mac.update(raw_body);
    mac.verify_slice(&expected).is_ok()
}

/// The header value a sender would attach to `raw_body`.
pub fn sign(raw_body: &[u8], secret: &[u8]) -> String {
    let mut mac = Hmac::<Sha256>::new_from_slice(secret).expect("HMAC accepts any key length");
    mac.update(raw_body);
    format!("sha256={}", hex::encode(mac.finalize().into_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_own_signature() {
        let sig = sign(b"payload", b"secret");
        assert!(verify_signature(b"payload", Some(&sig), b"secret"));
        assert!(verify_signature(b"payload", Some(sig.trim_start_matches("sha256=")), b"secret"));
    }

    #[test]
    fn rejects_bad_input() {
        let sig = sign(b"payload", b"secret");
        assert!(!verify_signature(b"payload", None, b"secret"));
        assert!(!verify_signature(b"payload", Some(&sig), b"other"));
        assert!(!verify_signature(b"payload", Some("sha256=zz"), b"secret"));
        assert!(!verify_signature(b"payload", Some(""), b"secret"));
        assert!(!verify_signature(b"payload", Some(&sig[..sig.len() - 2]), b"secret"));
    }
}
