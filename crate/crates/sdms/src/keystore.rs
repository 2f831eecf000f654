//! DEK lifecycle: generation, password-based wrapping, and keyfile storage.
//!
//! The DEK is sealed under a key derived from the passphrase with
//! PBKDF2-HMAC-SHA-256 and authenticated with AES-256-GCM, so a wrong
//! passphrase and a tampered keystore both fail the same way, releasing
//! nothing. The wrapped key lives either in the container header or in an
//! external keyfile, in which case the header keeps only a fingerprint.

use aes_gcm::aead::{Aead, Payload};
use aes_gcm::{Aes256Gcm, KeyInit, Nonce};
use hmac::Hmac;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kdf::Dek;
use crate::rng::{OsSeedSource, SeedSource};

/// Default PBKDF2 iteration count for passphrase-derived wrap keys.
pub const DEFAULT_KDF_ITERATIONS: u32 = 600_000;

/// Magic prefix of an external keyfile.
pub const KEYFILE_MAGIC: &[u8; 8] = b"SDMSKEY1";

/// External keyfile format version.
pub const KEYFILE_VERSION: u16 = 1;

const SALT_LEN: usize = 16;
const NONCE_LEN: usize = 12;
const TAG_LEN: usize = 16;
const WRAP_KEY_LEN: usize = 32;

// GCM binds the wrap to its purpose; a wrapped DEK pasted into some other
// AES-GCM context will not authenticate.
const WRAP_AAD: &[u8] = b"SDMS-DEK-WRAP1";

/// A DEK sealed under a passphrase-derived key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WrappedDek {
    pub kdf_salt: [u8; SALT_LEN],
    pub kdf_iterations: u32,
    pub wrap_nonce: [u8; NONCE_LEN],
    /// DEK ciphertext followed by the 16-byte authentication tag.
    pub wrapped_bytes: Vec<u8>,
}

/// Draws a fresh DEK from the operating-system randomness source.
pub fn generate_dek(length_bytes: usize) -> Result<Dek> {
    let mut bytes = vec![0u8; length_bytes];
    OsSeedSource.fill(&mut bytes)?;
    Dek::new(bytes)
}

/// Seals `dek` under `passphrase` with a fresh salt and nonce.
pub fn wrap_dek(dek: &Dek, passphrase: &str) -> Result<WrappedDek> {
    wrap_dek_with_iterations(dek, passphrase, DEFAULT_KDF_ITERATIONS)
}

/// As [`wrap_dek`] with an explicit PBKDF2 iteration count.
pub fn wrap_dek_with_iterations(
    dek: &Dek,
    passphrase: &str,
    iterations: u32,
) -> Result<WrappedDek> {
    if passphrase.is_empty() {
        return Err(Error::Contract("passphrase must not be empty".into()));
    }
    if iterations == 0 {
        return Err(Error::Config("KDF iteration count must be positive".into()));
    }
    let mut kdf_salt = [0u8; SALT_LEN];
    let mut wrap_nonce = [0u8; NONCE_LEN];
    OsSeedSource.fill(&mut kdf_salt)?;
    OsSeedSource.fill(&mut wrap_nonce)?;

    let key = derive_wrap_key(passphrase, &kdf_salt, iterations);
    let cipher = Aes256Gcm::new_from_slice(&key).expect("wrap key length fixed");
    let wrapped_bytes = cipher
        .encrypt(
            Nonce::from_slice(&wrap_nonce),
            Payload {
                msg: dek.as_bytes(),
                aad: WRAP_AAD,
            },
        )
        .map_err(|_| Error::Authentication)?;

    Ok(WrappedDek {
        kdf_salt,
        kdf_iterations: iterations,
        wrap_nonce,
        wrapped_bytes,
    })
}

/// Opens a wrapped DEK. A bad passphrase and a corrupted keystore are
/// indistinguishable by design.
pub fn unwrap_dek(wrapped: &WrappedDek, passphrase: &str) -> Result<Dek> {
    let key = derive_wrap_key(passphrase, &wrapped.kdf_salt, wrapped.kdf_iterations);
    let cipher = Aes256Gcm::new_from_slice(&key).expect("wrap key length fixed");
    let dek_bytes = cipher
        .decrypt(
            Nonce::from_slice(&wrapped.wrap_nonce),
            Payload {
                msg: &wrapped.wrapped_bytes,
                aad: WRAP_AAD,
            },
        )
        .map_err(|_| Error::Authentication)?;
    Dek::new(dek_bytes)
}

/// Re-seals the same DEK under a new passphrase with fresh salt and nonce.
/// Fails without side effects if the old passphrase is wrong.
pub fn rewrap_dek(
    wrapped: &WrappedDek,
    old_passphrase: &str,
    new_passphrase: &str,
) -> Result<WrappedDek> {
    let dek = unwrap_dek(wrapped, old_passphrase)?;
    wrap_dek_with_iterations(&dek, new_passphrase, wrapped.kdf_iterations)
}

fn derive_wrap_key(passphrase: &str, salt: &[u8], iterations: u32) -> [u8; WRAP_KEY_LEN] {
    let mut key = [0u8; WRAP_KEY_LEN];
    pbkdf2::pbkdf2::<Hmac<Sha256>>(passphrase.as_bytes(), salt, iterations, &mut key)
        .expect("output length fits HMAC counter space");
    key
}

impl WrappedDek {
    /// Serializes as length-prefixed fields in declared order; each prefix is
    /// a little-endian u16.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(
            2 + SALT_LEN + 2 + 4 + 2 + NONCE_LEN + 2 + self.wrapped_bytes.len(),
        );
        push_field(&mut out, &self.kdf_salt);
        push_field(&mut out, &self.kdf_iterations.to_le_bytes());
        push_field(&mut out, &self.wrap_nonce);
        push_field(&mut out, &self.wrapped_bytes);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = bytes;
        let salt = take_field(&mut cursor, "kdf_salt")?;
        let iterations = take_field(&mut cursor, "kdf_iterations")?;
        let nonce = take_field(&mut cursor, "wrap_nonce")?;
        let wrapped_bytes = take_field(&mut cursor, "wrapped_bytes")?.to_vec();
        if !cursor.is_empty() {
            return Err(Error::Format("trailing bytes after wrapped DEK".into()));
        }

        let kdf_salt: [u8; SALT_LEN] = salt
            .try_into()
            .map_err(|_| Error::Format("wrapped DEK salt must be 16 bytes".into()))?;
        let iter_bytes: [u8; 4] = iterations
            .try_into()
            .map_err(|_| Error::Format("wrapped DEK iteration field must be 4 bytes".into()))?;
        let wrap_nonce: [u8; NONCE_LEN] = nonce
            .try_into()
            .map_err(|_| Error::Format("wrapped DEK nonce must be 12 bytes".into()))?;
        if wrapped_bytes.len() <= TAG_LEN {
            return Err(Error::Format("wrapped DEK shorter than its tag".into()));
        }

        Ok(WrappedDek {
            kdf_salt,
            kdf_iterations: u32::from_le_bytes(iter_bytes),
            wrap_nonce,
            wrapped_bytes,
        })
    }
}

fn push_field(out: &mut Vec<u8>, field: &[u8]) {
    let len = u16::try_from(field.len()).expect("keystore fields fit in u16");
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(field);
}

fn take_field<'a>(cursor: &mut &'a [u8], name: &str) -> Result<&'a [u8]> {
    if cursor.len() < 2 {
        return Err(Error::Format(format!("truncated keystore field {name}")));
    }
    let len = usize::from(u16::from_le_bytes([cursor[0], cursor[1]]));
    let rest = &cursor[2..];
    if rest.len() < len {
        return Err(Error::Format(format!("truncated keystore field {name}")));
    }
    let (field, tail) = rest.split_at(len);
    *cursor = tail;
    Ok(field)
}

/// Full content of an external keyfile: magic, version, wrapped fields.
pub fn keyfile_bytes(wrapped: &WrappedDek) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(KEYFILE_MAGIC);
    out.extend_from_slice(&KEYFILE_VERSION.to_le_bytes());
    out.extend_from_slice(&wrapped.to_bytes());
    out
}

/// Parses keyfile content produced by [`keyfile_bytes`].
pub fn parse_keyfile(bytes: &[u8]) -> Result<WrappedDek> {
    if bytes.len() < KEYFILE_MAGIC.len() + 2 {
        return Err(Error::Format("keyfile too short".into()));
    }
    if &bytes[..8] != KEYFILE_MAGIC {
        return Err(Error::Format("not an SDMS keyfile".into()));
    }
    let version = u16::from_le_bytes([bytes[8], bytes[9]]);
    if version != KEYFILE_VERSION {
        return Err(Error::Format(format!("unsupported keyfile version {version}")));
    }
    WrappedDek::from_bytes(&bytes[10..])
}

/// SHA-256 over the entire keyfile content; what an external-keystore header
/// records instead of the wrapped DEK itself.
pub fn keyfile_fingerprint(keyfile: &[u8]) -> [u8; 32] {
    Sha256::digest(keyfile).into()
}
