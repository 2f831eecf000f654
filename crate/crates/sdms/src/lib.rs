//! File-backed encrypted virtual disk with per-write sector keys.
//!
//! Every 512-byte (or 4096-byte) logical sector is encrypted under its own
//! key, derived on the fly from a container-wide disk encryption key (DEK), a
//! random per-sector seed, and the sector index. Seeds are regenerated on
//! every write and stored raw next to the ciphertext, so rewriting a sector
//! always changes both the key and the ciphertext, and no two sectors ever
//! share a key. Recovering one sector's key therefore compromises neither
//! future writes to that sector nor any other sector.
//!
//! The crate provides the container format and sector I/O ([`device`]), the
//! geometry arithmetic ([`layout`]), the key derivation ([`kdf`]), the
//! AES-256-XTS sector cipher with its GF(2^128) tweak chain ([`cipher`]),
//! passphrase-based DEK management ([`keystore`]), and an analysis toolkit
//! that turns the scheme's security arguments into executable checks
//! ([`analysis`]).
//!
//! With the default `parallel` feature, bulk paths (container fill, key
//! campaigns) fan out over a rayon pool; disable it for a fully sequential
//! build.

pub mod analysis;
pub mod cipher;
pub mod device;
pub mod error;
pub mod kdf;
pub mod keystore;
pub mod layout;
pub mod rng;

pub use device::{InitParams, KeystoreSpec, SdmsDevice};
pub use error::{Error, Result};
