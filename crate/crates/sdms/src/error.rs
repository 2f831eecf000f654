use thiserror::Error;

/// Errors produced across the container, cipher, and key-management layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Rejected geometry or key-length configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Sector index outside the container's addressable range.
    #[error("sector index {index} out of range (container has {total} data sectors)")]
    OutOfRange { index: u64, total: u64 },

    /// A caller handed a buffer or value that violates an interface contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Wrong passphrase or a tampered keystore; the two are deliberately
    /// indistinguishable.
    #[error("wrong passphrase or corrupted keystore")]
    Authentication,

    /// Unrecognized or corrupted container/keyfile structure.
    #[error("format error: {0}")]
    Format(String),

    /// The container is already held by another process.
    #[error("container is locked by another process")]
    Locked,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// An interrupted sector write; the on-disk state of that sector is
    /// undefined until it is rewritten.
    #[error("i/o failure while writing sector {index} (sector state undefined): {source}")]
    SectorIo {
        index: u64,
        source: std::io::Error,
    },

    /// The system randomness source failed.
    #[error("randomness source failure: {0}")]
    Randomness(String),
}

pub type Result<T> = std::result::Result<T, Error>;
