//! Per-sector key derivation.
//!
//! Every sector operation derives its cipher key on the fly from the
//! container-wide DEK, the sector's stored seed, and the sector index. The
//! derivation is a keyed-hash expansion: output block `t` is
//!
//! ```text
//! HMAC-SHA-512(key = DEK, msg = seed || LE64(sector_index) || LE32(t) || "SDMS-DKF1")
//! ```
//!
//! with blocks concatenated and truncated to the key length of the sector
//! cipher. The message layout is normative; independent implementations must
//! produce byte-identical keys.

use hmac::{Hmac, Mac};
use sha2::Sha512;
use zeroize::Zeroize;

use crate::error::{Error, Result};

/// Domain-separation tag appended to every derivation message.
pub const DOMAIN_TAG: &[u8; 9] = b"SDMS-DKF1";

/// Sector-key length for AES-256-XTS: two 256-bit subkeys.
pub const RTEK_LEN: usize = 64;

/// Smallest accepted DEK, in bytes.
pub const MIN_DEK_LEN: usize = 32;

/// Largest accepted DEK, in bytes.
pub const MAX_DEK_LEN: usize = 1024;

/// Width of the sector index as fed to the derivation, in bits.
pub const INDEX_BITS: u32 = 64;

/// The disk encryption key. Generated once at container initialization; it
/// never encrypts data directly.
pub struct Dek(Vec<u8>);

impl Dek {
    pub fn new(bytes: Vec<u8>) -> Result<Self> {
        if bytes.len() < MIN_DEK_LEN || bytes.len() > MAX_DEK_LEN {
            return Err(Error::Config(format!(
                "DEK length must be {MIN_DEK_LEN}..={MAX_DEK_LEN} bytes, got {}",
                bytes.len()
            )));
        }
        Ok(Dek(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl Drop for Dek {
    fn drop(&mut self) {
        self.0.zeroize();
    }
}

/// A per-sector random seed, stored raw in the block's SA area and
/// regenerated on every write.
#[derive(Clone, PartialEq, Eq)]
pub struct Seed(Vec<u8>);

impl Seed {
    /// Accepts bytes of the configured seed size. Size limits mirror the
    /// geometry rules so a malformed slice is caught at the boundary.
    pub fn new(bytes: Vec<u8>) -> Result<Self> {
        if bytes.len() < usize::from(crate::layout::MIN_SEED_SIZE) || bytes.len() > 4096 {
            return Err(Error::Contract(format!(
                "seed length {} outside accepted range", bytes.len()
            )));
        }
        Ok(Seed(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl Drop for Seed {
    fn drop(&mut self) {
        self.0.zeroize();
    }
}

/// A real-time sector key. Lives only for the duration of one sector
/// operation and is wiped on drop.
pub struct Rtek([u8; RTEK_LEN]);

impl Rtek {
    /// Builds a sector key from externally specified bytes; the cipher
    /// known-answer suites pin their published keys through this.
    pub fn from_bytes(bytes: [u8; RTEK_LEN]) -> Self {
        Rtek(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; RTEK_LEN] {
        &self.0
    }
}

impl Drop for Rtek {
    fn drop(&mut self) {
        self.0.zeroize();
    }
}

/// Derives the sector key for `sector_index` under `dek` and `seed`.
pub fn dk_func(dek: &Dek, seed: &Seed, sector_index: u64) -> Rtek {
    let mut out = [0u8; RTEK_LEN];
    derive_into(dek, seed, sector_index, &mut out);
    Rtek(out)
}

/// Counter-mode expansion backing [`dk_func`]; fills `out` of any length.
pub(crate) fn derive_into(dek: &Dek, seed: &Seed, sector_index: u64, out: &mut [u8]) {
    let mut counter = 0u32;
    for chunk in out.chunks_mut(64) {
        let mut mac = Hmac::<Sha512>::new_from_slice(dek.as_bytes())
            .expect("HMAC accepts any key length");
        mac.update(seed.as_bytes());
        mac.update(&sector_index.to_le_bytes());
        mac.update(&counter.to_le_bytes());
        mac.update(DOMAIN_TAG);
        let block = mac.finalize().into_bytes();
        chunk.copy_from_slice(&block[..chunk.len()]);
        counter += 1;
    }
}

/// Size of the derivation's input space in bits: the attacker-facing search
/// space for recovering the DEK from one sector key.
pub fn input_space_bits(dek_bits: u64, index_bits: u64, seed_bits: u64) -> u64 {
    dek_bits + index_bits + seed_bits
}
