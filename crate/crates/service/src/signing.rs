//! Time-limited download links.
//!
//! A link is `/download/<path>?expires=<epoch>&sig=<hex>` where `sig` is the
//! lowercase hex HMAC-SHA-256 of `path + "\n" + expires` under the server
//! secret. Verification is strict about the layout so that no two spellings
//! of one link exist.

use std::fmt;
use std::time::{SystemTime, UNIX_EPOCH};

use hmac::{Hmac, KeyInit, Mac};
use sha2::Sha256;

pub const DOWNLOAD_PREFIX: &str = "/download/";

type HmacSha256 = Hmac<Sha256>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedUrl {
    pub path: String,
    pub expires: u64,
    pub signature: String,
}

impl fmt::Display for SignedUrl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{DOWNLOAD_PREFIX}{}?expires={}&sig={}",
            self.path, self.expires, self.signature
        )
    }
}

fn mac(path: &str, expires: u64, secret: &[u8]) -> HmacSha256 {
    let mut mac = HmacSha256::new_from_slice(secret).expect("hmac accepts any key length");
    mac.update(path.as_bytes());
    mac.update(b"\n");
    mac.update(expires.to_string().as_bytes());
    mac
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Sign `path` so that it stays valid for `ttl_seconds` from now.
pub fn sign_url(path: &str, ttl_seconds: u64, secret: &[u8]) -> SignedUrl {
    sign_url_at(path, unix_now().saturating_add(ttl_seconds.max(1)), secret)
}

pub fn sign_url_at(path: &str, expires: u64, secret: &[u8]) -> SignedUrl {
    let signature = hex::encode(mac(path, expires, secret).finalize().into_bytes());
    SignedUrl {
        path: path.to_string(),
        expires,
        signature,
    }
}

/// `expires` as written by [`SignedUrl`]: decimal digits without a sign or
/// leading zeros.
fn canonical_epoch(s: &str) -> Option<u64> {
    let canonical = !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) && (s == "0" || !s.starts_with('0'));
    if canonical {
        s.parse().ok()
    } else {
        None
    }
}

fn lower_hex_sha256(s: &str) -> Option<Vec<u8>> {
    if s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
        hex::decode(s).ok()
    } else {
        None
    }
}

/// Split a link into its parts without checking the signature.
pub fn parse_signed_url(url: &str) -> Option<SignedUrl> {
    let rest = url.strip_prefix(DOWNLOAD_PREFIX)?;
    let (path, query) = rest.split_once('?')?;
    let (expires, sig) = query.strip_prefix("expires=")?.split_once("&sig=")?;
    if path.is_empty() {
        return None;
    }
    Some(SignedUrl {
        path: path.to_string(),
        expires: canonical_epoch(expires)?,
        signature: sig.to_string(),
    })
}

/// Check a signed path and query pair: `path` without the download prefix.
pub fn verify_parts(path: &str, expires: &str, sig: &str, secret: &[u8], now: u64) -> bool {
    let (Some(expires), Some(sig)) = (canonical_epoch(expires), lower_hex_sha256(sig)) else {
        return false;
    };
    now < expires && mac(path, expires, secret).verify_slice(&sig).is_ok()
}

/// True iff `url` was produced by [`sign_url`] under `secret` and has not
/// expired at `now`.
pub fn verify_signed_url(url: &str, secret: &[u8], now: u64) -> bool {
    match parse_signed_url(url) {
        Some(u) => verify_parts(&u.path, &u.expires.to_string(), &u.signature, secret, now),
        None => false,
    }
}
