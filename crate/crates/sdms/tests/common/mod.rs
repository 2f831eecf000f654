//! Shared test support: an independent GF(2^128) oracle and container
//! helpers. The oracle stays deliberately naive — bit-level polynomial
//! arithmetic with none of the library's shortcuts — so agreement between
//! the two is evidence, not tautology.

#![allow(dead_code)]

pub mod ieee1619;

use sdms::device::{InitParams, KeystoreSpec};

/// Carry-less polynomial multiply in GF(2^128) reduced modulo
/// x^128 + x^7 + x^2 + x + 1, bit i of the u128 holding the coefficient
/// of x^i.
pub fn gf128_mul_naive(a: u128, b: u128) -> u128 {
    let mut product = [false; 256];
    for i in 0..128 {
        if (a >> i) & 1 == 0 {
            continue;
        }
        for j in 0..128 {
            if (b >> j) & 1 == 1 {
                product[i + j] ^= true;
            }
        }
    }
    // Reduce: x^k = x^(k-128) * (x^7 + x^2 + x + 1) for k >= 128.
    for k in (128..256).rev() {
        if product[k] {
            product[k] = false;
            product[k - 128 + 7] ^= true;
            product[k - 128 + 2] ^= true;
            product[k - 128 + 1] ^= true;
            product[k - 128] ^= true;
        }
    }
    let mut out = 0u128;
    for (i, &bit) in product[..128].iter().enumerate() {
        out |= u128::from(bit) << i;
    }
    out
}

/// Init parameters sized for tests: small container, cheap passphrase wrap.
pub fn small_params(total_data_sectors: u64) -> InitParams {
    InitParams {
        kdf_iterations: 1_000,
        keystore: KeystoreSpec::Embedded,
        ..InitParams::new(total_data_sectors)
    }
}
