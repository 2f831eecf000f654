//! The block device over a container file.
//!
//! A container is a 4096-byte header followed by the data area: blocks laid
//! out back to back, each one's SA region (seed slots) preceding its DA
//! region (ciphertext sectors). Every write draws a fresh seed, derives the
//! sector key, encrypts, and persists ciphertext before seed. Reads refetch
//! the stored seed and re-derive; nothing is cached.

use std::fs::{File, OpenOptions, TryLockError};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::cipher::{xts_decrypt_sector, xts_encrypt_sector, SectorCipherParams};
use crate::error::{Error, Result};
use crate::kdf::{self, dk_func, Dek, Seed};
use crate::keystore::{self, WrappedDek};
use crate::layout::{derive_geometry, Geometry};
use crate::rng::{OsSeedSource, SeedSource};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Bytes reserved for the container header; the data area starts here.
pub const HEADER_SIZE: u64 = 4096;

/// Container magic.
pub const MAGIC: &[u8; 8] = b"SDMSDSK1";

/// Container format version.
pub const FORMAT_VERSION: u16 = 1;

/// Sector encryption algorithm identifier: AES-256-XTS.
pub const EA_AES256_XTS: u8 = 1;

/// Key derivation identifier: the normative keyed-hash expansion.
pub const KDF_DKFUNC_V1: u8 = 1;

/// Where the wrapped DEK lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeystoreMode {
    /// Wrapped DEK embedded in the container header.
    Embedded = 0,
    /// Wrapped DEK in an external keyfile; the header keeps a fingerprint.
    External = 1,
}

/// Parsed container header. Multi-byte integers are little-endian on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContainerHeader {
    pub version: u16,
    pub sector_size: u32,
    pub seed_size: u16,
    pub sa_sectors_per_block: u16,
    pub total_data_sectors: u64,
    pub dek_length: u16,
    pub ea_id: u8,
    pub kdf_id: u8,
    pub keystore_mode: KeystoreMode,
    /// Embedded mode: the serialized [`WrappedDek`]. External mode: the
    /// 32-byte keyfile fingerprint.
    pub wrapped_dek_or_fingerprint: Vec<u8>,
}

impl ContainerHeader {
    /// Serializes to the fixed 4096-byte on-disk form, checksum included.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(HEADER_SIZE as usize);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&self.sector_size.to_le_bytes());
        out.extend_from_slice(&self.seed_size.to_le_bytes());
        out.extend_from_slice(&self.sa_sectors_per_block.to_le_bytes());
        out.extend_from_slice(&self.total_data_sectors.to_le_bytes());
        out.extend_from_slice(&self.dek_length.to_le_bytes());
        out.push(self.ea_id);
        out.push(self.kdf_id);
        out.push(self.keystore_mode as u8);
        let wrapped_len = u16::try_from(self.wrapped_dek_or_fingerprint.len())
            .map_err(|_| Error::Format("wrapped DEK field too large".into()))?;
        out.extend_from_slice(&wrapped_len.to_le_bytes());
        out.extend_from_slice(&self.wrapped_dek_or_fingerprint);

        let checksum: [u8; 32] = Sha256::digest(&out).into();
        out.extend_from_slice(&checksum);
        if out.len() > HEADER_SIZE as usize {
            return Err(Error::Format("header exceeds reserved block".into()));
        }
        out.resize(HEADER_SIZE as usize, 0);
        Ok(out)
    }

    /// Parses and verifies a 4096-byte header block. Magic and version are
    /// checked before anything else is trusted; a checksum mismatch rejects
    /// the container outright.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_SIZE as usize {
            return Err(Error::Format("header block truncated".into()));
        }
        if &bytes[..8] != MAGIC {
            return Err(Error::Format("not an SDMS container (bad magic)".into()));
        }
        let version = u16::from_le_bytes([bytes[8], bytes[9]]);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported container version {version}")));
        }

        let sector_size = u32::from_le_bytes(bytes[10..14].try_into().unwrap());
        let seed_size = u16::from_le_bytes([bytes[14], bytes[15]]);
        let sa_sectors_per_block = u16::from_le_bytes([bytes[16], bytes[17]]);
        let total_data_sectors = u64::from_le_bytes(bytes[18..26].try_into().unwrap());
        let dek_length = u16::from_le_bytes([bytes[26], bytes[27]]);
        let ea_id = bytes[28];
        let kdf_id = bytes[29];
        let keystore_mode = match bytes[30] {
            0 => KeystoreMode::Embedded,
            1 => KeystoreMode::External,
            other => {
                return Err(Error::Format(format!("unknown keystore mode {other}")));
            }
        };
        let wrapped_len = usize::from(u16::from_le_bytes([bytes[31], bytes[32]]));
        let wrapped_end = 33 + wrapped_len;
        if wrapped_end + 32 > HEADER_SIZE as usize {
            return Err(Error::Format("wrapped DEK field overruns header".into()));
        }
        let wrapped = bytes[33..wrapped_end].to_vec();

        let stored_checksum = &bytes[wrapped_end..wrapped_end + 32];
        let computed: [u8; 32] = Sha256::digest(&bytes[..wrapped_end]).into();
        if stored_checksum != computed {
            return Err(Error::Format("header checksum mismatch".into()));
        }

        if ea_id != EA_AES256_XTS {
            return Err(Error::Format(format!("unsupported encryption algorithm id {ea_id}")));
        }
        if kdf_id != KDF_DKFUNC_V1 {
            return Err(Error::Format(format!("unsupported key derivation id {kdf_id}")));
        }

        Ok(ContainerHeader {
            version,
            sector_size,
            seed_size,
            sa_sectors_per_block,
            total_data_sectors,
            dek_length,
            ea_id,
            kdf_id,
            keystore_mode,
            wrapped_dek_or_fingerprint: wrapped,
        })
    }

    /// Derives and validates the geometry promised by the header fields.
    pub fn geometry(&self) -> Result<Geometry> {
        let geometry = derive_geometry(
            self.sector_size,
            self.seed_size,
            self.sa_sectors_per_block,
            self.total_data_sectors,
        )?;
        validate_key_config(&geometry, usize::from(self.dek_length))?;
        Ok(geometry)
    }
}

/// The derivation's input space must dominate its output space; enforced for
/// every accepted configuration.
fn validate_key_config(geometry: &Geometry, dek_length: usize) -> Result<()> {
    if dek_length < kdf::MIN_DEK_LEN || dek_length > kdf::MAX_DEK_LEN {
        return Err(Error::Config(format!(
            "DEK length must be {}..={} bytes, got {dek_length}",
            kdf::MIN_DEK_LEN,
            kdf::MAX_DEK_LEN
        )));
    }
    let input_bits = kdf::input_space_bits(
        dek_length as u64 * 8,
        u64::from(kdf::INDEX_BITS),
        u64::from(geometry.seed_size()) * 8,
    );
    let output_bits = kdf::RTEK_LEN as u64 * 8;
    if input_bits <= output_bits {
        return Err(Error::Config(format!(
            "derivation input space ({input_bits} bits) must exceed the \
             {output_bits}-bit sector key space; use a longer DEK or seed"
        )));
    }
    Ok(())
}

/// How a new container stores its wrapped DEK.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeystoreSpec {
    Embedded,
    ExternalKeyfile(PathBuf),
}

/// Parameters for container initialization.
#[derive(Debug, Clone)]
pub struct InitParams {
    pub sector_size: u32,
    pub seed_size: u16,
    pub sa_sectors_per_block: u16,
    pub total_data_sectors: u64,
    pub dek_length: usize,
    pub kdf_iterations: u32,
    pub keystore: KeystoreSpec,
    /// Replace an existing file at the container path.
    pub overwrite: bool,
}

impl InitParams {
    /// Defaults: 512-byte sectors, 16-byte seeds, one SA sector per block,
    /// 2048-bit DEK, embedded keystore.
    pub fn new(total_data_sectors: u64) -> Self {
        InitParams {
            sector_size: 512,
            seed_size: 16,
            sa_sectors_per_block: 1,
            total_data_sectors,
            dek_length: 256,
            kdf_iterations: keystore::DEFAULT_KDF_ITERATIONS,
            keystore: KeystoreSpec::Embedded,
            overwrite: false,
        }
    }
}

enum KeystoreBacking {
    Embedded,
    External(PathBuf),
}

/// An unlocked container. Constructing one requires a successful unwrap, so
/// no sector operation can precede authentication. Operations take `&mut
/// self`: one handle, serialized use, transferable between threads.
pub struct SdmsDevice {
    file: File,
    header: ContainerHeader,
    geometry: Geometry,
    dek: Dek,
    seed_source: Box<dyn SeedSource>,
    keystore: KeystoreBacking,
}

impl std::fmt::Debug for SdmsDevice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Key material stays out of debug output.
        f.debug_struct("SdmsDevice")
            .field("geometry", &self.geometry)
            .field("keystore_mode", &self.header.keystore_mode)
            .finish_non_exhaustive()
    }
}

impl SdmsDevice {
    /// Creates and fills a new container. Every SA slot receives a fresh
    /// seed and every data sector the encryption of an all-zero sector, so
    /// never-written and zero-written sectors are indistinguishable. The
    /// container materializes at `path` only if initialization completes.
    pub fn init_container(path: &Path, params: &InitParams, passphrase: &str) -> Result<Self> {
        Self::init_container_with_source(path, params, passphrase, Box::new(OsSeedSource))
    }

    /// As [`Self::init_container`] with an explicit seed source.
    pub fn init_container_with_source(
        path: &Path,
        params: &InitParams,
        passphrase: &str,
        seed_source: Box<dyn SeedSource>,
    ) -> Result<Self> {
        let geometry = derive_geometry(
            params.sector_size,
            params.seed_size,
            params.sa_sectors_per_block,
            params.total_data_sectors,
        )?;
        validate_key_config(&geometry, params.dek_length)?;

        if path.exists() && !params.overwrite {
            return Err(Error::Config(format!(
                "{} already exists; pass overwrite to replace it",
                path.display()
            )));
        }

        let dek = keystore::generate_dek(params.dek_length)?;
        let wrapped = keystore::wrap_dek_with_iterations(&dek, passphrase, params.kdf_iterations)?;

        let (keystore_mode, wrapped_field, backing) = match &params.keystore {
            KeystoreSpec::Embedded => (
                KeystoreMode::Embedded,
                wrapped.to_bytes(),
                KeystoreBacking::Embedded,
            ),
            KeystoreSpec::ExternalKeyfile(keyfile_path) => {
                let keyfile = keystore::keyfile_bytes(&wrapped);
                write_replacing(keyfile_path, &keyfile)?;
                (
                    KeystoreMode::External,
                    keystore::keyfile_fingerprint(&keyfile).to_vec(),
                    KeystoreBacking::External(keyfile_path.clone()),
                )
            }
        };

        let header = ContainerHeader {
            version: FORMAT_VERSION,
            sector_size: params.sector_size,
            seed_size: params.seed_size,
            sa_sectors_per_block: params.sa_sectors_per_block,
            total_data_sectors: params.total_data_sectors,
            dek_length: u16::try_from(params.dek_length)
                .map_err(|_| Error::Config("DEK length does not fit header field".into()))?,
            ea_id: EA_AES256_XTS,
            kdf_id: KDF_DKFUNC_V1,
            keystore_mode,
            wrapped_dek_or_fingerprint: wrapped_field,
        };

        // Build in a scratch file and rename into place, so a failed init
        // never leaves a container that a later open would accept.
        let partial_path = partial_path_for(path);
        match Self::fill_new_container(&partial_path, header, geometry, dek, seed_source, backing) {
            Ok(device) => {
                std::fs::rename(&partial_path, path).map_err(|e| {
                    let _ = std::fs::remove_file(&partial_path);
                    Error::Io(e)
                })?;
                Ok(device)
            }
            Err(e) => {
                let _ = std::fs::remove_file(&partial_path);
                if let KeystoreSpec::ExternalKeyfile(keyfile_path) = &params.keystore {
                    let _ = std::fs::remove_file(keyfile_path);
                }
                Err(e)
            }
        }
    }

    fn fill_new_container(
        partial_path: &Path,
        header: ContainerHeader,
        geometry: Geometry,
        dek: Dek,
        mut seed_source: Box<dyn SeedSource>,
        keystore: KeystoreBacking,
    ) -> Result<Self> {
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(true)
            .open(partial_path)?;
        lock_exclusive(&file)?;

        file.set_len(HEADER_SIZE + geometry.data_area_bytes())?;
        file.seek(SeekFrom::Start(0))?;
        file.write_all(&header.to_bytes()?)?;

        let block_bytes = geometry.block_bytes() as usize;
        let sa_bytes = geometry.sa_bytes() as usize;
        let seed_size = usize::from(geometry.seed_size());
        let sector_size = geometry.sector_size() as usize;
        let zero_sector = vec![0u8; sector_size];

        // Bound memory: build and flush the data area a batch of blocks at a
        // time. Seeds are drawn sequentially in sector order regardless of
        // the execution mode, so a given source yields the same container.
        let blocks_per_batch = (8 << 20) / block_bytes + 1;
        let mut block = 0u64;
        while block < geometry.block_count() {
            let batch_end = (block + blocks_per_batch as u64).min(geometry.block_count());
            let batch: Vec<(u64, Vec<u8>)> = (block..batch_end)
                .map(|b| {
                    let mut sa_area = vec![0u8; sa_bytes];
                    let used = geometry.sectors_in_block(b) as usize;
                    seed_source.fill(&mut sa_area[..used * seed_size])?;
                    Ok((b, sa_area))
                })
                .collect::<Result<_>>()?;

            let build = |(b, sa_area): &(u64, Vec<u8>)| -> Vec<u8> {
                let mut buf = vec![0u8; block_bytes];
                buf[..sa_bytes].copy_from_slice(sa_area);
                let first_sector = b * u64::from(geometry.da_sectors_per_block());
                for slot in 0..geometry.sectors_in_block(*b) as usize {
                    let index = first_sector + slot as u64;
                    let seed = Seed::new(sa_area[slot * seed_size..(slot + 1) * seed_size].to_vec())
                        .expect("seed size validated by geometry");
                    let rtek = dk_func(&dek, &seed, index);
                    let params = SectorCipherParams::new(&rtek, index);
                    let ct = xts_encrypt_sector(&params, &zero_sector)
                        .expect("sector size validated by geometry");
                    buf[sa_bytes + slot * sector_size..sa_bytes + (slot + 1) * sector_size]
                        .copy_from_slice(&ct);
                }
                buf
            };

            #[cfg(feature = "parallel")]
            let built: Vec<Vec<u8>> = batch.par_iter().map(build).collect();
            #[cfg(not(feature = "parallel"))]
            let built: Vec<Vec<u8>> = batch.iter().map(build).collect();

            file.seek(SeekFrom::Start(HEADER_SIZE + block * block_bytes as u64))?;
            for buf in &built {
                file.write_all(buf)?;
            }
            block = batch_end;
        }
        file.sync_all()?;

        Ok(SdmsDevice {
            file,
            header,
            geometry,
            dek,
            seed_source,
            keystore,
        })
    }

    /// Opens and unlocks an existing container. External-keystore containers
    /// need the keyfile that was produced at initialization.
    pub fn open_container(path: &Path, passphrase: &str) -> Result<Self> {
        Self::open_container_with_keyfile(path, passphrase, None)
    }

    pub fn open_container_with_keyfile(
        path: &Path,
        passphrase: &str,
        keyfile: Option<&Path>,
    ) -> Result<Self> {
        let mut file = OpenOptions::new().read(true).write(true).open(path)?;
        lock_exclusive(&file)?;

        let header = read_header_block(&mut file)?;
        let geometry = header.geometry()?;

        let expected_len = HEADER_SIZE + geometry.data_area_bytes();
        let actual_len = file.metadata()?.len();
        if actual_len != expected_len {
            return Err(Error::Format(format!(
                "container length {actual_len} does not match geometry ({expected_len})"
            )));
        }

        let (wrapped, backing) = match header.keystore_mode {
            KeystoreMode::Embedded => (
                WrappedDek::from_bytes(&header.wrapped_dek_or_fingerprint)?,
                KeystoreBacking::Embedded,
            ),
            KeystoreMode::External => {
                let keyfile_path = keyfile.ok_or_else(|| {
                    Error::Config("container uses an external keyfile; provide its path".into())
                })?;
                let bytes = std::fs::read(keyfile_path)?;
                if keystore::keyfile_fingerprint(&bytes).as_slice()
                    != header.wrapped_dek_or_fingerprint.as_slice()
                {
                    return Err(Error::Format(
                        "keyfile does not match the container's fingerprint".into(),
                    ));
                }
                (
                    keystore::parse_keyfile(&bytes)?,
                    KeystoreBacking::External(keyfile_path.to_path_buf()),
                )
            }
        };

        let dek = keystore::unwrap_dek(&wrapped, passphrase)?;
        if dek.len() != usize::from(header.dek_length) {
            return Err(Error::Format("unwrapped DEK length disagrees with header".into()));
        }

        Ok(SdmsDevice {
            file,
            header,
            geometry,
            dek,
            seed_source: Box::new(OsSeedSource),
            keystore: backing,
        })
    }

    /// Swaps the seed source used by subsequent writes.
    pub fn set_seed_source(&mut self, source: Box<dyn SeedSource>) {
        self.seed_source = source;
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn header(&self) -> &ContainerHeader {
        &self.header
    }

    pub(crate) fn dek(&self) -> &Dek {
        &self.dek
    }

    /// Encrypts and persists one sector: fresh seed, derived key, ciphertext
    /// to the DA sector, then the seed to its SA slot.
    pub fn write_sector(&mut self, sector_index: u64, plaintext: &[u8]) -> Result<()> {
        if plaintext.len() != self.geometry.sector_size() as usize {
            return Err(Error::Contract(format!(
                "plaintext must be exactly {} bytes, got {}",
                self.geometry.sector_size(),
                plaintext.len()
            )));
        }
        let loc = self.geometry.locate(sector_index)?;

        let mut seed_bytes = vec![0u8; usize::from(self.geometry.seed_size())];
        self.seed_source.fill(&mut seed_bytes)?;
        let seed = Seed::new(seed_bytes)?;

        let rtek = dk_func(&self.dek, &seed, sector_index);
        let params = SectorCipherParams::new(&rtek, sector_index);
        let ciphertext = xts_encrypt_sector(&params, plaintext)?;

        let sector_io = |e: std::io::Error| Error::SectorIo {
            index: sector_index,
            source: e,
        };
        self.file
            .seek(SeekFrom::Start(HEADER_SIZE + loc.data_offset))
            .map_err(sector_io)?;
        self.file.write_all(&ciphertext).map_err(sector_io)?;
        self.file
            .seek(SeekFrom::Start(HEADER_SIZE + loc.seed_offset))
            .map_err(sector_io)?;
        self.file.write_all(seed.as_bytes()).map_err(sector_io)?;
        Ok(())
    }

    /// Fetches the stored seed and ciphertext and reverses the write path.
    /// There is no per-sector integrity: corrupted bytes decrypt to garbage
    /// without an error here.
    pub fn read_sector(&mut self, sector_index: u64) -> Result<Vec<u8>> {
        let loc = self.geometry.locate(sector_index)?;
        let seed = Seed::new(self.read_at(
            HEADER_SIZE + loc.seed_offset,
            usize::from(self.geometry.seed_size()),
        )?)?;
        let ciphertext = self.read_at(
            HEADER_SIZE + loc.data_offset,
            self.geometry.sector_size() as usize,
        )?;

        let rtek = dk_func(&self.dek, &seed, sector_index);
        let params = SectorCipherParams::new(&rtek, sector_index);
        xts_decrypt_sector(&params, &ciphertext)
    }

    /// Raw stored seed for a sector; inspection hook for audits and tests.
    pub fn peek_stored_seed(&mut self, sector_index: u64) -> Result<Vec<u8>> {
        let loc = self.geometry.locate(sector_index)?;
        self.read_at(
            HEADER_SIZE + loc.seed_offset,
            usize::from(self.geometry.seed_size()),
        )
    }

    /// Raw stored ciphertext for a sector; inspection hook for audits and tests.
    pub fn peek_stored_ciphertext(&mut self, sector_index: u64) -> Result<Vec<u8>> {
        let loc = self.geometry.locate(sector_index)?;
        self.read_at(
            HEADER_SIZE + loc.data_offset,
            self.geometry.sector_size() as usize,
        )
    }

    fn read_at(&mut self, offset: u64, len: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; len];
        self.file.seek(SeekFrom::Start(offset))?;
        self.file.read_exact(&mut buf)?;
        Ok(buf)
    }

    /// Streams plaintext into consecutive sectors starting at 0; a short
    /// final chunk is zero-padded. Returns the number of sectors written.
    pub fn import_raw(&mut self, source: &mut dyn Read) -> Result<u64> {
        let sector_size = self.geometry.sector_size() as usize;
        let mut buf = vec![0u8; sector_size];
        let mut index = 0u64;
        loop {
            let filled = read_up_to(source, &mut buf)?;
            if filled == 0 {
                return Ok(index);
            }
            if index >= self.geometry.total_data_sectors() {
                return Err(Error::OutOfRange {
                    index,
                    total: self.geometry.total_data_sectors(),
                });
            }
            buf[filled..].fill(0);
            self.write_sector(index, &buf)?;
            index += 1;
            if filled < sector_size {
                return Ok(index);
            }
        }
    }

    /// Streams every sector's plaintext, whole sectors only, to `sink`.
    /// Returns the number of sectors emitted.
    pub fn export_raw(&mut self, sink: &mut dyn Write) -> Result<u64> {
        for index in 0..self.geometry.total_data_sectors() {
            let sector = self.read_sector(index)?;
            sink.write_all(&sector)?;
        }
        Ok(self.geometry.total_data_sectors())
    }

    /// Changes the passphrase: same DEK, fresh wrap. Sector data is not
    /// touched. Fails without side effects if the old passphrase is wrong.
    pub fn change_passphrase(&mut self, old_passphrase: &str, new_passphrase: &str) -> Result<()> {
        match &self.keystore {
            KeystoreBacking::Embedded => {
                let wrapped = WrappedDek::from_bytes(&self.header.wrapped_dek_or_fingerprint)?;
                let rewrapped = keystore::rewrap_dek(&wrapped, old_passphrase, new_passphrase)?;
                self.header.wrapped_dek_or_fingerprint = rewrapped.to_bytes();
            }
            KeystoreBacking::External(keyfile_path) => {
                let bytes = std::fs::read(keyfile_path)?;
                let wrapped = keystore::parse_keyfile(&bytes)?;
                let rewrapped = keystore::rewrap_dek(&wrapped, old_passphrase, new_passphrase)?;
                let keyfile = keystore::keyfile_bytes(&rewrapped);
                write_replacing(keyfile_path, &keyfile)?;
                self.header.wrapped_dek_or_fingerprint =
                    keystore::keyfile_fingerprint(&keyfile).to_vec();
            }
        }
        let header_bytes = self.header.to_bytes()?;
        self.file.seek(SeekFrom::Start(0))?;
        self.file.write_all(&header_bytes)?;
        self.file.sync_all()?;
        Ok(())
    }
}

/// Reads and validates a container header without unlocking the DEK; used by
/// informational commands that must not require a passphrase.
pub fn read_header(path: &Path) -> Result<(ContainerHeader, Geometry)> {
    let mut file = File::open(path)?;
    let header = read_header_block(&mut file)?;
    let geometry = header.geometry()?;
    Ok((header, geometry))
}

fn read_header_block(file: &mut File) -> Result<ContainerHeader> {
    let mut block = vec![0u8; HEADER_SIZE as usize];
    file.seek(SeekFrom::Start(0))?;
    file.read_exact(&mut block)
        .map_err(|_| Error::Format("container too short for a header".into()))?;
    ContainerHeader::parse(&block)
}

fn lock_exclusive(file: &File) -> Result<()> {
    match file.try_lock() {
        Ok(()) => Ok(()),
        Err(TryLockError::WouldBlock) => Err(Error::Locked),
        Err(TryLockError::Error(e)) => Err(Error::Io(e)),
    }
}

fn partial_path_for(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    path.with_file_name(name)
}

/// Writes a file via a scratch sibling and rename, replacing any existing one.
fn write_replacing(path: &Path, bytes: &[u8]) -> Result<()> {
    let partial = partial_path_for(path);
    let result = (|| -> Result<()> {
        let mut f = OpenOptions::new()
            .write(true)
            .create(true)
            .truncate(true)
            .open(&partial)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        Ok(())
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&partial);
        return result;
    }
    std::fs::rename(&partial, path).map_err(|e| {
        let _ = std::fs::remove_file(&partial);
        Error::Io(e)
    })
}

fn read_up_to(source: &mut dyn Read, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}
