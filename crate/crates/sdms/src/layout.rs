//! Block geometry and address translation.
//!
//! The data area of a container is divided into fixed-size blocks. Each block
//! starts with `sa_sectors_per_block` seed sectors (the SA region) holding one
//! seed slot per data sector, followed by `da_sectors_per_block` data sectors
//! (the DA region) holding ciphertext. Everything here is pure arithmetic over
//! that shape; the container module layers the on-disk origin on top.

use crate::error::{Error, Result};

/// Sector sizes accepted by the container format.
pub const SUPPORTED_SECTOR_SIZES: [u32; 2] = [512, 4096];

/// Smallest permitted per-sector seed.
pub const MIN_SEED_SIZE: u16 = 8;

/// Shape of one container: sector/seed sizes and the derived block split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    sector_size: u32,
    seed_size: u16,
    sa_sectors_per_block: u16,
    da_sectors_per_block: u32,
    total_data_sectors: u64,
}

/// Where one logical sector lives, as byte offsets from the data-area origin.
///
/// The container adds its header size to obtain absolute file offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhysicalLocation {
    /// Offset of the sector's ciphertext.
    pub data_offset: u64,
    /// Offset of the sector's seed slot.
    pub seed_offset: u64,
    /// Ordinal of the enclosing block.
    pub block_index: u64,
}

/// Validates the configured sizes and computes the data-sectors-per-block
/// split: `(sa_sectors_per_block * sector_size) / seed_size`.
pub fn derive_geometry(
    sector_size: u32,
    seed_size: u16,
    sa_sectors_per_block: u16,
    total_data_sectors: u64,
) -> Result<Geometry> {
    if !SUPPORTED_SECTOR_SIZES.contains(&sector_size) {
        return Err(Error::Config(format!(
            "sector size must be one of {SUPPORTED_SECTOR_SIZES:?}, got {sector_size}"
        )));
    }
    if seed_size == 0 || sector_size % u32::from(seed_size) != 0 {
        return Err(Error::Config(format!(
            "seed size {seed_size} does not divide sector size {sector_size}"
        )));
    }
    if seed_size < MIN_SEED_SIZE {
        return Err(Error::Config(format!(
            "seed size must be at least {MIN_SEED_SIZE} bytes, got {seed_size}"
        )));
    }
    if sa_sectors_per_block == 0 {
        return Err(Error::Config("at least one seed sector per block".into()));
    }
    if total_data_sectors == 0 {
        return Err(Error::Config("container must hold at least one data sector".into()));
    }

    let sa_bytes = u64::from(sa_sectors_per_block) * u64::from(sector_size);
    let da_sectors_per_block = u32::try_from(sa_bytes / u64::from(seed_size))
        .map_err(|_| Error::Config("block would hold too many sectors".into()))?;

    Ok(Geometry {
        sector_size,
        seed_size,
        sa_sectors_per_block,
        da_sectors_per_block,
        total_data_sectors,
    })
}

impl Geometry {
    pub fn sector_size(&self) -> u32 {
        self.sector_size
    }

    pub fn seed_size(&self) -> u16 {
        self.seed_size
    }

    pub fn sa_sectors_per_block(&self) -> u16 {
        self.sa_sectors_per_block
    }

    pub fn da_sectors_per_block(&self) -> u32 {
        self.da_sectors_per_block
    }

    pub fn total_data_sectors(&self) -> u64 {
        self.total_data_sectors
    }

    /// Bytes of the SA region of one block.
    pub fn sa_bytes(&self) -> u64 {
        u64::from(self.sa_sectors_per_block) * u64::from(self.sector_size)
    }

    /// Full extent of one block: SA region followed by DA region.
    pub fn block_bytes(&self) -> u64 {
        self.sa_bytes() + u64::from(self.da_sectors_per_block) * u64::from(self.sector_size)
    }

    /// Number of blocks, counting a partial trailing block as a full extent.
    pub fn block_count(&self) -> u64 {
        self.total_data_sectors.div_ceil(u64::from(self.da_sectors_per_block))
    }

    /// Total bytes of the data area.
    pub fn data_area_bytes(&self) -> u64 {
        self.block_count() * self.block_bytes()
    }

    /// Number of addressable sectors in block `block_index`; the trailing
    /// block may hold fewer than `da_sectors_per_block`.
    pub fn sectors_in_block(&self, block_index: u64) -> u32 {
        let da = u64::from(self.da_sectors_per_block);
        let start = block_index * da;
        let end = (start + da).min(self.total_data_sectors);
        end.saturating_sub(start) as u32
    }

    /// Maps a logical sector index to its seed slot and data sector offsets.
    pub fn locate(&self, sector_index: u64) -> Result<PhysicalLocation> {
        if sector_index >= self.total_data_sectors {
            return Err(Error::OutOfRange {
                index: sector_index,
                total: self.total_data_sectors,
            });
        }
        let da = u64::from(self.da_sectors_per_block);
        let block_index = sector_index / da;
        let slot = sector_index % da;
        let block_start = block_index * self.block_bytes();
        Ok(PhysicalLocation {
            seed_offset: block_start + slot * u64::from(self.seed_size),
            data_offset: block_start + self.sa_bytes() + slot * u64::from(self.sector_size),
            block_index,
        })
    }
}
