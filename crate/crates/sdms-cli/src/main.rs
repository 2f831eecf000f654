//! Command-line front end for SDMS encrypted containers.
//!
//! Exit codes are a stable scripting contract: 0 success, 1 usage or
//! configuration error, 2 authentication failure, 3 format or corruption
//! error, 4 I/O failure, 5 audit failure.
//!
//! Passphrases are never taken as command-line arguments (they would leak
//! into shell history); they come from `--pass-fd`, the `SDMS_PASSPHRASE`
//! environment variable, or an interactive prompt, in that order.

use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sdms::analysis::{
    run_spatial_campaign_on_device, run_temporal_campaign, seed_entropy_scan, AttackCostReport,
};
use sdms::device::{read_header, KeystoreMode};
use sdms::error::Error;
use sdms::kdf::{INDEX_BITS, RTEK_LEN};
use sdms::rng::OsSeedSource;
use sdms::{InitParams, KeystoreSpec, SdmsDevice};

mod passphrase;

const PASSPHRASE_ENV: &str = "SDMS_PASSPHRASE";
const NEW_PASSPHRASE_ENV: &str = "SDMS_NEW_PASSPHRASE";

#[derive(Parser)]
#[command(name = "sdms", version, about = "File-backed encrypted disk with per-write sector keys")]
struct Cli {
    /// Emit machine-readable key=value lines instead of prose
    #[arg(long, global = true)]
    machine: bool,

    /// Read the passphrase from this file descriptor (first line)
    #[arg(long, global = true, value_name = "FD")]
    pass_fd: Option<i32>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create and fill a new container
    Init {
        path: PathBuf,
        /// Number of addressable data sectors
        #[arg(long)]
        sectors: u64,
        /// Bytes per logical sector (512 or 4096)
        #[arg(long, default_value_t = 512)]
        sector_size: u32,
        /// Bytes per stored sector seed
        #[arg(long, default_value_t = 16)]
        seed_size: u16,
        /// Disk encryption key size in bits (multiple of 8)
        #[arg(long, default_value_t = 2048)]
        dek_bits: u32,
        /// Seed sectors per block
        #[arg(long, default_value_t = 1)]
        sa_sectors: u16,
        /// PBKDF2 iteration count for the passphrase wrap
        #[arg(long, default_value_t = 600_000)]
        kdf_iterations: u32,
        /// Store the wrapped key in this external keyfile instead of the header
        #[arg(long)]
        keyfile: Option<PathBuf>,
        /// Replace an existing file at the container path
        #[arg(long)]
        force: bool,
    },
    /// Decrypt one sector to a file or stdout
    Read {
        path: PathBuf,
        #[arg(long)]
        sector: u64,
        /// Destination file; `-` or absent means stdout
        #[arg(long = "out", value_name = "PATH")]
        output: Option<PathBuf>,
        #[arg(long)]
        keyfile: Option<PathBuf>,
    },
    /// Encrypt one sector from a file or stdin
    Write {
        path: PathBuf,
        #[arg(long)]
        sector: u64,
        /// Source file; `-` or absent means stdin
        #[arg(long = "in", value_name = "PATH")]
        input: Option<PathBuf>,
        /// Zero-pad input shorter than one sector
        #[arg(long)]
        pad: bool,
        #[arg(long)]
        keyfile: Option<PathBuf>,
    },
    /// Stream plaintext into consecutive sectors from a file or stdin
    Import {
        path: PathBuf,
        #[arg(long = "in", value_name = "PATH")]
        input: Option<PathBuf>,
        #[arg(long)]
        keyfile: Option<PathBuf>,
    },
    /// Stream every sector's plaintext to a file or stdout
    Export {
        path: PathBuf,
        #[arg(long = "out", value_name = "PATH")]
        output: Option<PathBuf>,
        #[arg(long)]
        keyfile: Option<PathBuf>,
    },
    /// Print header fields, geometry, and attack-cost figures (no passphrase)
    Info { path: PathBuf },
    /// Change the passphrase; sector data is untouched
    Passwd {
        path: PathBuf,
        /// Read the new passphrase from this file descriptor (first line)
        #[arg(long, value_name = "FD")]
        new_pass_fd: Option<i32>,
        #[arg(long)]
        keyfile: Option<PathBuf>,
    },
    /// Run the temporal/spatial campaigns and the seed entropy scan
    Audit {
        path: PathBuf,
        /// Rewrites of the scratch sector in the temporal campaign
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// (seed, index) samples in the spatial campaign
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long)]
        keyfile: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests land here too; only real usage
            // errors take the nonzero path.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("sdms: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Contract(_) | Error::OutOfRange { .. } => 1,
        Error::Authentication => 2,
        Error::Format(_) => 3,
        Error::Io(_) | Error::SectorIo { .. } | Error::Locked | Error::Randomness(_) => 4,
    }
}

fn run(cli: &Cli) -> Result<u8, Error> {
    match &cli.command {
        Command::Init {
            path,
            sectors,
            sector_size,
            seed_size,
            dek_bits,
            sa_sectors,
            kdf_iterations,
            keyfile,
            force,
        } => cmd_init(
            cli,
            path,
            *sectors,
            *sector_size,
            *seed_size,
            *dek_bits,
            *sa_sectors,
            *kdf_iterations,
            keyfile.as_deref(),
            *force,
        ),
        Command::Read {
            path,
            sector,
            output,
            keyfile,
        } => cmd_read(cli, path, *sector, output.as_deref(), keyfile.as_deref()),
        Command::Write {
            path,
            sector,
            input,
            pad,
            keyfile,
        } => cmd_write(cli, path, *sector, input.as_deref(), *pad, keyfile.as_deref()),
        Command::Import { path, input, keyfile } => {
            cmd_import(cli, path, input.as_deref(), keyfile.as_deref())
        }
        Command::Export { path, output, keyfile } => {
            cmd_export(cli, path, output.as_deref(), keyfile.as_deref())
        }
        Command::Info { path } => cmd_info(cli, path),
        Command::Passwd {
            path,
            new_pass_fd,
            keyfile,
        } => cmd_passwd(cli, path, *new_pass_fd, keyfile.as_deref()),
        Command::Audit {
            path,
            trials,
            samples,
            keyfile,
        } => cmd_audit(cli, path, *trials, *samples, keyfile.as_deref()),
    }
}

fn open_device(cli: &Cli, path: &Path, keyfile: Option<&Path>) -> Result<SdmsDevice, Error> {
    let passphrase = passphrase::resolve(cli.pass_fd, PASSPHRASE_ENV, "Passphrase: ")?;
    SdmsDevice::open_container_with_keyfile(path, &passphrase, keyfile)
}

#[allow(clippy::too_many_arguments)]
fn cmd_init(
    cli: &Cli,
    path: &Path,
    sectors: u64,
    sector_size: u32,
    seed_size: u16,
    dek_bits: u32,
    sa_sectors: u16,
    kdf_iterations: u32,
    keyfile: Option<&Path>,
    force: bool,
) -> Result<u8, Error> {
    if dek_bits == 0 || dek_bits % 8 != 0 {
        return Err(Error::Config(format!(
            "--dek-bits must be a positive multiple of 8, got {dek_bits}"
        )));
    }
    let params = InitParams {
        sector_size,
        seed_size,
        sa_sectors_per_block: sa_sectors,
        total_data_sectors: sectors,
        dek_length: dek_bits as usize / 8,
        kdf_iterations,
        keystore: match keyfile {
            Some(p) => KeystoreSpec::ExternalKeyfile(p.to_path_buf()),
            None => KeystoreSpec::Embedded,
        },
        overwrite: force,
    };
    let passphrase = passphrase::resolve(cli.pass_fd, PASSPHRASE_ENV, "Passphrase: ")?;
    let device = SdmsDevice::init_container(path, &params, &passphrase)?;

    let geometry = device.geometry();
    let report = AttackCostReport::for_device(&device)?;
    if cli.machine {
        print_geometry_kv(geometry, path);
        print_kv(&report.key_values());
    } else {
        println!("created {}", path.display());
        println!(
            "geometry: {} data sectors of {} bytes, {}-byte seeds",
            geometry.total_data_sectors(),
            geometry.sector_size(),
            geometry.seed_size(),
        );
        println!(
            "layout: {} data sectors per block, {} seed sector(s) per block, {} block(s)",
            geometry.da_sectors_per_block(),
            geometry.sa_sectors_per_block(),
            geometry.block_count(),
        );
        println!(
            "container size: {} bytes",
            sdms::device::HEADER_SIZE + geometry.data_area_bytes()
        );
        println!("{report}");
    }
    Ok(0)
}

fn cmd_read(
    cli: &Cli,
    path: &Path,
    sector: u64,
    output: Option<&Path>,
    keyfile: Option<&Path>,
) -> Result<u8, Error> {
    let mut device = open_device(cli, path, keyfile)?;
    let plaintext = device.read_sector(sector)?;
    let mut sink = open_sink(output)?;
    sink.write_all(&plaintext)?;
    sink.flush()?;
    Ok(0)
}

fn cmd_write(
    cli: &Cli,
    path: &Path,
    sector: u64,
    input: Option<&Path>,
    pad: bool,
    keyfile: Option<&Path>,
) -> Result<u8, Error> {
    let mut device = open_device(cli, path, keyfile)?;
    let sector_size = device.geometry().sector_size() as usize;

    let mut payload = Vec::new();
    open_source(input)?.read_to_end(&mut payload)?;
    if payload.len() < sector_size && pad {
        payload.resize(sector_size, 0);
    }
    if payload.len() != sector_size {
        return Err(Error::Contract(format!(
            "input is {} bytes but sectors are {sector_size} bytes (use --pad for short input)",
            payload.len()
        )));
    }
    device.write_sector(sector, &payload)?;
    Ok(0)
}

fn cmd_import(
    cli: &Cli,
    path: &Path,
    input: Option<&Path>,
    keyfile: Option<&Path>,
) -> Result<u8, Error> {
    let mut device = open_device(cli, path, keyfile)?;
    let mut source = open_source(input)?;
    let sectors = device.import_raw(&mut source)?;
    if cli.machine {
        println!("imported_sectors={sectors}");
    } else {
        println!("imported {sectors} sector(s)");
    }
    Ok(0)
}

fn cmd_export(
    cli: &Cli,
    path: &Path,
    output: Option<&Path>,
    keyfile: Option<&Path>,
) -> Result<u8, Error> {
    let mut device = open_device(cli, path, keyfile)?;
    let mut sink = open_sink(output)?;
    let sectors = device.export_raw(&mut sink)?;
    sink.flush()?;
    if output.is_some_and(|p| p.as_os_str() != "-") {
        if cli.machine {
            println!("exported_sectors={sectors}");
        } else {
            println!("exported {sectors} sector(s)");
        }
    }
    Ok(0)
}

fn cmd_info(cli: &Cli, path: &Path) -> Result<u8, Error> {
    let (header, geometry) = read_header(path)?;
    let report = AttackCostReport::for_config(
        u64::from(header.dek_length) * 8,
        RTEK_LEN as u64 * 8,
        u64::from(INDEX_BITS),
        u64::from(header.seed_size) * 8,
    )?;

    if cli.machine {
        println!("version={}", header.version);
        print_geometry_kv(&geometry, path);
        println!("dek_bits={}", u64::from(header.dek_length) * 8);
        println!("ea_id={}", header.ea_id);
        println!("kdf_id={}", header.kdf_id);
        println!(
            "keystore_mode={}",
            match header.keystore_mode {
                KeystoreMode::Embedded => "embedded",
                KeystoreMode::External => "external",
            }
        );
        print_kv(&report.key_values());
    } else {
        println!("container: {}", path.display());
        println!("format version: {}", header.version);
        println!(
            "geometry: {} data sectors of {} bytes, {}-byte seeds",
            geometry.total_data_sectors(),
            geometry.sector_size(),
            geometry.seed_size(),
        );
        println!(
            "layout: {} data sectors per block, {} seed sector(s) per block, {} block(s)",
            geometry.da_sectors_per_block(),
            geometry.sa_sectors_per_block(),
            geometry.block_count(),
        );
        println!("encryption: AES-256-XTS (ea_id {})", header.ea_id);
        println!("key derivation: keyed-hash expansion (kdf_id {})", header.kdf_id);
        println!("DEK: {} bits", u64::from(header.dek_length) * 8);
        println!(
            "keystore: {}",
            match header.keystore_mode {
                KeystoreMode::Embedded => "embedded in header",
                KeystoreMode::External => "external keyfile",
            }
        );
        println!("{report}");
    }
    Ok(0)
}

fn cmd_passwd(
    cli: &Cli,
    path: &Path,
    new_pass_fd: Option<i32>,
    keyfile: Option<&Path>,
) -> Result<u8, Error> {
    let old = passphrase::resolve(cli.pass_fd, PASSPHRASE_ENV, "Current passphrase: ")?;
    let new = passphrase::resolve_new(new_pass_fd, NEW_PASSPHRASE_ENV)?;
    let mut device = SdmsDevice::open_container_with_keyfile(path, &old, keyfile)?;
    device.change_passphrase(&old, &new)?;
    if !cli.machine {
        println!("passphrase changed");
    }
    Ok(0)
}

fn cmd_audit(
    cli: &Cli,
    path: &Path,
    trials: usize,
    samples: usize,
    keyfile: Option<&Path>,
) -> Result<u8, Error> {
    let mut device = open_device(cli, path, keyfile)?;

    // The temporal campaign rewrites a sector; use the last one as scratch
    // and restore its plaintext afterward so audits are nondestructive.
    let scratch = device.geometry().total_data_sectors() - 1;
    let saved = device.read_sector(scratch)?;
    let temporal = run_temporal_campaign(&mut device, scratch, trials);
    let restore = device.write_sector(scratch, &saved);
    let temporal = temporal?;
    restore?;

    let mut source = OsSeedSource;
    let spatial = run_spatial_campaign_on_device(&device, samples, &mut source)?;
    let entropy = seed_entropy_scan(&mut device)?;

    if cli.machine {
        print_kv(&temporal.key_values());
        print_kv(&spatial.key_values());
        print_kv(&entropy.key_values());
    } else {
        println!("{temporal}");
        println!("{spatial}");
        println!("{entropy}");
    }

    let all_passed = temporal.passed() && spatial.passed() && entropy.passed();
    if !all_passed {
        eprintln!("sdms: audit failed");
        return Ok(5);
    }
    if !cli.machine {
        println!("audit passed");
    }
    Ok(0)
}

fn print_geometry_kv(geometry: &sdms::layout::Geometry, path: &Path) {
    println!("container={}", path.display());
    println!("sector_size={}", geometry.sector_size());
    println!("seed_size={}", geometry.seed_size());
    println!("sa_sectors_per_block={}", geometry.sa_sectors_per_block());
    println!("da_sectors_per_block={}", geometry.da_sectors_per_block());
    println!("total_data_sectors={}", geometry.total_data_sectors());
    println!("blocks={}", geometry.block_count());
    println!(
        "container_bytes={}",
        sdms::device::HEADER_SIZE + geometry.data_area_bytes()
    );
}

fn print_kv(pairs: &[(&'static str, String)]) {
    for (k, v) in pairs {
        println!("{k}={v}");
    }
}

fn open_source(spec: Option<&Path>) -> Result<Box<dyn Read>, Error> {
    match spec {
        None => Ok(Box::new(io::stdin().lock())),
        Some(p) if p.as_os_str() == "-" => Ok(Box::new(io::stdin().lock())),
        Some(p) => Ok(Box::new(BufReader::new(File::open(p)?))),
    }
}

fn open_sink(spec: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    match spec {
        None => Ok(Box::new(io::stdout().lock())),
        Some(p) if p.as_os_str() == "-" => Ok(Box::new(io::stdout().lock())),
        Some(p) => Ok(Box::new(File::create(p)?)),
    }
}
