//! Seeded, counter-based random fields and draws.
//!
//! Fourier coefficients are keyed by `(seed, trial, frequency integer)`, so a
//! field drawn on a refined grid (same torus, smaller spacing) has exactly the
//! same coefficients on the shared band.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::{Field, SpectralField};
use crate::grid::{GridSpec, Lattice};

/// SplitMix64 finalizer; used to derive independent stream keys.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A generator for one `(seed, trial)` pair.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, trial))
}

fn zigzag(k: i64) -> u64 {
    ((k << 1) ^ (k >> 63)) as u64
}

/// A standard complex Gaussian attached to a frequency integer.
fn coefficient(rng: &mut ChaCha8Rng, k: Lattice) -> Complex64 {
    // Cantor pairing of the zig-zagged coordinates gives each lattice point
    // its own block of the stream.
    let (a, b) = (zigzag(k[0]), zigzag(k[1]));
    let pos = (a + b) * (a + b + 1) / 2 + b;
    rng.set_word_pos(pos as u128 * 8);
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    let r = (-u1.ln()).sqrt();
    Complex64::from_polar(r, 2.0 * PI * u2)
}

/// Spectral envelope of random fields.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Envelope {
    /// Gaussian width in absolute frequency units.
    pub width: f64,
}

impl Default for Envelope {
    fn default() -> Self {
        Self { width: 4.0 }
    }
}

/// A random mean-zero field with complex Gaussian Fourier coefficients
/// weighted by `exp(-|xi|^2 / (2 width^2))`.
pub fn random_field(grid: &GridSpec, envelope: Envelope, seed: u64, trial: u64) -> Field {
    let mut rng = trial_rng(seed, trial);
    let cutoff = 9.0 * envelope.width;
    let spec = SpectralField::from_fn(*grid, |k| {
        if k == [0, 0] {
            return Complex64::new(0.0, 0.0);
        }
        let xi = grid.freq_value(k);
        let r2 = xi[0] * xi[0] + xi[1] * xi[1];
        if r2.sqrt() > cutoff {
            return Complex64::new(0.0, 0.0);
        }
        coefficient(&mut rng, k) * (-r2 / (2.0 * envelope.width * envelope.width)).exp()
    });
    spec.inverse_fourier()
}

/// A random field with i.i.d. complex Gaussian samples (not mean-zero).
pub fn white_field(grid: &GridSpec, seed: u64, trial: u64) -> Field {
    let mut rng = trial_rng(seed, trial);
    Field::from_fn(*grid, |_| {
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random::<f64>();
        Complex64::from_polar((-u1.ln()).sqrt(), 2.0 * PI * u2)
    })
}
