//! Executable security analysis.
//!
//! The calculators turn the brute-force cost formulas into exact integer
//! arithmetic over log2 exponents; quantities like 2^1536 never materialize.
//! The campaigns demonstrate the scheme's two headline properties on a live
//! container: rewriting a sector always produces a new seed and new
//! ciphertext, and distinct sectors never share a derived key. The entropy
//! scan inspects the stored seed pool itself.

use std::collections::HashSet;
use std::fmt;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::device::SdmsDevice;
use crate::error::{Error, Result};
use crate::kdf::{dk_func, Dek, Seed, INDEX_BITS, RTEK_LEN};
use crate::rng::SeedSource;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// log2 of the work to brute-force one sector key, in units of one sector
/// encryption trial.
pub fn sector_attack_work(rtek_bits: u64) -> u64 {
    rtek_bits
}

/// log2 of the number of DEK candidates consistent with one recovered
/// sector key.
pub fn dek_candidate_count(dek_bits: u64, rtek_bits: u64) -> Result<u64> {
    if dek_bits <= rtek_bits {
        return Err(Error::Contract(format!(
            "DEK space ({dek_bits} bits) must exceed sector-key space ({rtek_bits} bits)"
        )));
    }
    Ok(dek_bits - rtek_bits)
}

/// Negated log2 of the probability that a DEK candidate recovered from one
/// sector decrypts a different sector.
pub fn cross_sector_success_exponent(
    dek_bits: u64,
    rtek_bits: u64,
    index_bits: u64,
    seed_bits: u64,
) -> Result<u64> {
    Ok(dek_candidate_count(dek_bits, rtek_bits)? + index_bits + seed_bits)
}

/// Brute-force cost summary for one configuration; pure arithmetic, fully
/// reproducible from the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttackCostReport {
    pub sector_attack_work_log2: u64,
    pub dek_space_log2: u64,
    pub dek_candidate_count_log2: u64,
    pub cross_sector_success_exponent: u64,
}

impl AttackCostReport {
    pub fn for_config(dek_bits: u64, rtek_bits: u64, index_bits: u64, seed_bits: u64) -> Result<Self> {
        Ok(AttackCostReport {
            sector_attack_work_log2: sector_attack_work(rtek_bits),
            dek_space_log2: dek_bits,
            dek_candidate_count_log2: dek_candidate_count(dek_bits, rtek_bits)?,
            cross_sector_success_exponent: cross_sector_success_exponent(
                dek_bits, rtek_bits, index_bits, seed_bits,
            )?,
        })
    }

    /// Report for a container's actual header parameters.
    pub fn for_device(device: &SdmsDevice) -> Result<Self> {
        Self::for_config(
            u64::from(device.header().dek_length) * 8,
            RTEK_LEN as u64 * 8,
            u64::from(INDEX_BITS),
            u64::from(device.geometry().seed_size()) * 8,
        )
    }

    /// Machine-readable form: one `(key, decimal exponent)` pair per field.
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("sector_attack_work_log2", self.sector_attack_work_log2.to_string()),
            ("dek_space_log2", self.dek_space_log2.to_string()),
            ("dek_candidate_count_log2", self.dek_candidate_count_log2.to_string()),
            (
                "cross_sector_success_exponent",
                self.cross_sector_success_exponent.to_string(),
            ),
        ]
    }
}

impl fmt::Display for AttackCostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "direct sector-key search: 2^{} trials",
            self.sector_attack_work_log2
        )?;
        writeln!(f, "DEK search space: 2^{}", self.dek_space_log2)?;
        writeln!(
            f,
            "DEK candidates per recovered sector key: 2^{}",
            self.dek_candidate_count_log2
        )?;
        write!(
            f,
            "cross-sector decryption success: 2^-{}",
            self.cross_sector_success_exponent
        )
    }
}

/// Outcome of a repeated-rewrite campaign on one sector.
#[derive(Debug, Clone)]
pub struct TemporalReport {
    pub sector_index: u64,
    pub trials: usize,
    /// Trial pairs whose stored seeds collided.
    pub seed_collisions: Vec<(usize, usize)>,
    /// Trial pairs whose stored ciphertexts collided.
    pub ciphertext_collisions: Vec<(usize, usize)>,
}

impl TemporalReport {
    pub fn passed(&self) -> bool {
        self.seed_collisions.is_empty() && self.ciphertext_collisions.is_empty()
    }

    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("temporal_trials", self.trials.to_string()),
            ("temporal_seed_collisions", self.seed_collisions.len().to_string()),
            (
                "temporal_ciphertext_collisions",
                self.ciphertext_collisions.len().to_string(),
            ),
            ("temporal_passed", self.passed().to_string()),
        ]
    }
}

impl fmt::Display for TemporalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "temporal campaign: {} rewrites of sector {} -> {} seed collision(s), \
             {} ciphertext collision(s): {}",
            self.trials,
            self.sector_index,
            self.seed_collisions.len(),
            self.ciphertext_collisions.len(),
            if self.passed() { "pass" } else { "FAIL" }
        )?;
        for (a, b) in self.seed_collisions.iter().chain(&self.ciphertext_collisions) {
            write!(f, "\n  colliding trials: {a} and {b}")?;
        }
        Ok(())
    }
}

/// Rewrites the same plaintext to one sector `trials` times and checks that
/// every persisted seed and every persisted ciphertext is new. The device's
/// seed source drives the randomness, so replaying a transcript reproduces
/// the report exactly.
pub fn run_temporal_campaign(
    device: &mut SdmsDevice,
    sector_index: u64,
    trials: usize,
) -> Result<TemporalReport> {
    if trials < 2 {
        return Err(Error::Contract("temporal campaign needs at least 2 trials".into()));
    }
    let plaintext = vec![0xa5u8; device.geometry().sector_size() as usize];

    let mut seeds: Vec<Vec<u8>> = Vec::with_capacity(trials);
    let mut ciphertexts: Vec<Vec<u8>> = Vec::with_capacity(trials);
    for _ in 0..trials {
        device.write_sector(sector_index, &plaintext)?;
        seeds.push(device.peek_stored_seed(sector_index)?);
        ciphertexts.push(device.peek_stored_ciphertext(sector_index)?);
    }

    Ok(TemporalReport {
        sector_index,
        trials,
        seed_collisions: find_collisions(&seeds),
        ciphertext_collisions: find_collisions(&ciphertexts),
    })
}

fn find_collisions(values: &[Vec<u8>]) -> Vec<(usize, usize)> {
    let mut first_seen: std::collections::HashMap<&[u8], usize> = std::collections::HashMap::new();
    let mut collisions = Vec::new();
    for (i, v) in values.iter().enumerate() {
        match first_seen.entry(v.as_slice()) {
            std::collections::hash_map::Entry::Occupied(e) => collisions.push((*e.get(), i)),
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(i);
            }
        }
    }
    collisions
}

/// Outcome of a cross-sector key-derivation campaign.
#[derive(Debug, Clone)]
pub struct SpatialReport {
    pub samples: usize,
    /// Sample pairs that derived the same sector key (expected: none).
    pub rtek_collisions: Vec<(usize, usize)>,
    /// Smallest Hamming distance observed between any two derived keys.
    pub min_hamming_distance: u32,
}

impl SpatialReport {
    pub fn passed(&self) -> bool {
        self.rtek_collisions.is_empty()
    }

    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("spatial_samples", self.samples.to_string()),
            ("spatial_rtek_collisions", self.rtek_collisions.len().to_string()),
            ("spatial_min_hamming_distance", self.min_hamming_distance.to_string()),
            ("spatial_passed", self.passed().to_string()),
        ]
    }
}

impl fmt::Display for SpatialReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "spatial campaign: {} sampled (seed, index) pairs -> {} key collision(s), \
             minimum Hamming distance {} bits: {}",
            self.samples,
            self.rtek_collisions.len(),
            self.min_hamming_distance,
            if self.passed() { "pass" } else { "FAIL" }
        )
    }
}

/// Samples `sample_count` random (seed, index) pairs with pairwise-distinct
/// indices under one DEK and checks that every derived key is unique,
/// reporting the minimum pairwise Hamming distance. All randomness flows
/// through `source`, so a transcript makes the run reproducible.
pub fn run_spatial_campaign(
    dek: &Dek,
    seed_size: usize,
    sample_count: usize,
    source: &mut dyn SeedSource,
) -> Result<SpatialReport> {
    if sample_count < 2 {
        return Err(Error::Contract("spatial campaign needs at least 2 samples".into()));
    }

    let mut indices = HashSet::with_capacity(sample_count);
    let mut rteks: Vec<[u8; RTEK_LEN]> = Vec::with_capacity(sample_count);
    let mut pairs: Vec<(Vec<u8>, u64)> = Vec::with_capacity(sample_count);
    while pairs.len() < sample_count {
        let mut index_bytes = [0u8; 8];
        source.fill(&mut index_bytes)?;
        let index = u64::from_le_bytes(index_bytes);
        if !indices.insert(index) {
            continue; // indices must be pairwise distinct
        }
        let mut seed = vec![0u8; seed_size];
        source.fill(&mut seed)?;
        pairs.push((seed, index));
    }

    let derive = |(seed, index): &(Vec<u8>, u64)| -> [u8; RTEK_LEN] {
        let seed = Seed::new(seed.clone()).expect("campaign seed size validated");
        *dk_func(dek, &seed, *index).as_bytes()
    };
    #[cfg(feature = "parallel")]
    pairs.par_iter().map(derive).collect_into_vec(&mut rteks);
    #[cfg(not(feature = "parallel"))]
    rteks.extend(pairs.iter().map(derive));

    let rtek_collisions = find_collisions(
        &rteks.iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
    );
    let min_hamming_distance = min_pairwise_hamming(&rteks);

    Ok(SpatialReport {
        samples: sample_count,
        rtek_collisions,
        min_hamming_distance,
    })
}

/// [`run_spatial_campaign`] over a live container's own DEK and seed size;
/// the DEK itself never leaves the device.
pub fn run_spatial_campaign_on_device(
    device: &SdmsDevice,
    sample_count: usize,
    source: &mut dyn SeedSource,
) -> Result<SpatialReport> {
    run_spatial_campaign(
        device.dek(),
        usize::from(device.geometry().seed_size()),
        sample_count,
        source,
    )
}

fn hamming(a: &[u8; RTEK_LEN], b: &[u8; RTEK_LEN]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

fn min_pairwise_hamming(rteks: &[[u8; RTEK_LEN]]) -> u32 {
    let row_min = |i: usize| -> u32 {
        let mut min = u32::MAX;
        for j in (i + 1)..rteks.len() {
            min = min.min(hamming(&rteks[i], &rteks[j]));
        }
        min
    };
    #[cfg(feature = "parallel")]
    {
        (0..rteks.len().saturating_sub(1))
            .into_par_iter()
            .map(row_min)
            .min()
            .unwrap_or(u32::MAX)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..rteks.len().saturating_sub(1))
            .map(row_min)
            .min()
            .unwrap_or(u32::MAX)
    }
}

/// Statistics over the container's stored seed pool.
#[derive(Debug, Clone)]
pub struct EntropyReport {
    pub pooled_bytes: usize,
    pub ones: u64,
    /// Monobit deviation from the fair-coin expectation, in sigmas.
    pub monobit_sigmas: f64,
    pub chi2_statistic: f64,
    pub chi2_p_value: f64,
}

impl EntropyReport {
    /// Monobit within 3 sigma and byte-frequency chi-square p above 0.001.
    pub fn passed(&self) -> bool {
        self.monobit_sigmas <= 3.0 && self.chi2_p_value > 0.001
    }

    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("seed_pool_bytes", self.pooled_bytes.to_string()),
            ("seed_monobit_sigmas", format!("{:.4}", self.monobit_sigmas)),
            ("seed_chi2_statistic", format!("{:.4}", self.chi2_statistic)),
            ("seed_chi2_p_value", format!("{:.6}", self.chi2_p_value)),
            ("seed_scan_passed", self.passed().to_string()),
        ]
    }
}

impl fmt::Display for EntropyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "seed entropy scan: {} pooled bytes, monobit {:.2} sigma, \
             chi-square {:.1} (p = {:.4}): {}",
            self.pooled_bytes,
            self.monobit_sigmas,
            self.chi2_statistic,
            self.chi2_p_value,
            if self.passed() { "pass" } else { "FAIL" }
        )
    }
}

/// Reads every in-use SA slot and runs monobit and byte-frequency chi-square
/// tests over the pooled seed bytes. A failing scan is a reported finding,
/// not an error.
pub fn seed_entropy_scan(device: &mut SdmsDevice) -> Result<EntropyReport> {
    let total = device.geometry().total_data_sectors();
    let mut ones = 0u64;
    let mut byte_counts = [0u64; 256];
    let mut pooled_bytes = 0usize;
    for index in 0..total {
        let seed = device.peek_stored_seed(index)?;
        pooled_bytes += seed.len();
        for &b in &seed {
            ones += u64::from(b.count_ones());
            byte_counts[usize::from(b)] += 1;
        }
    }

    let bits = pooled_bytes as f64 * 8.0;
    let sigma = bits.sqrt() / 2.0;
    let monobit_sigmas = (ones as f64 - bits / 2.0).abs() / sigma;

    let expected = pooled_bytes as f64 / 256.0;
    let chi2_statistic: f64 = byte_counts
        .iter()
        .map(|&obs| {
            let d = obs as f64 - expected;
            d * d / expected
        })
        .sum();
    let chi2_p_value = 1.0 - ChiSquared::new(255.0).expect("fixed dof").cdf(chi2_statistic);

    Ok(EntropyReport {
        pooled_bytes,
        ones,
        monobit_sigmas,
        chi2_statistic,
        chi2_p_value,
    })
}
