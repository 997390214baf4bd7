use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported number of samples per axis, as a power of two.
pub const MAX_AXIS_EXPONENT: i32 = 22;

/// Integer coordinates on the spatial or frequency lattice. Unused trailing
/// coordinates (n = 1) are zero.
pub type Lattice = [i64; 2];

/// A uniform periodic grid over the torus `[0, 2^p)^n` with spacing `2^-q`.
///
/// Spatial samples sit at `k * 2^-q`, `k = 0..N`, and frequencies at
/// `k * 2^-p`, `k = -N/2..N/2`, where `N = 2^(p+q)` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    p: i32,
    q: i32,
}

impl GridSpec {
    pub fn new(dim: usize, p: i32, q: i32) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Dimension(dim));
        }
        if p + q < 1 {
            return Err(Error::Grid(format!("p + q = {} must be at least 1", p + q)));
        }
        if p + q > MAX_AXIS_EXPONENT || (dim == 2 && p + q > MAX_AXIS_EXPONENT / 2) {
            return Err(Error::Grid(format!("p + q = {} is too large for n = {dim}", p + q)));
        }
        Ok(Self { dim, p, q })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Torus side exponent: the side is `2^p`.
    pub fn box_exponent(&self) -> i32 {
        self.p
    }

    /// Resolution exponent: the spacing is `2^-q`.
    pub fn resolution_exponent(&self) -> i32 {
        self.q
    }

    pub fn samples_per_axis(&self) -> usize {
        1usize << (self.p + self.q)
    }

    pub fn len(&self) -> usize {
        self.samples_per_axis().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        pow2(-self.q)
    }

    pub fn side(&self) -> f64 {
        pow2(self.p)
    }

    pub fn freq_spacing(&self) -> f64 {
        pow2(-self.p)
    }

    /// `h^n`, the Riemann weight of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// `2^-pn`, the weight of one frequency sample.
    pub fn freq_cell_volume(&self) -> f64 {
        self.freq_spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.side().powi(self.dim as i32)
    }

    /// Frequencies per axis lie in `[-nyquist, nyquist)`.
    pub fn nyquist(&self) -> f64 {
        pow2(self.q - 1)
    }

    /// Whether a dyadic scale `nu` is representable (spatial cube at least one
    /// spacing wide and no larger than the torus).
    pub fn scale_in_range(&self, nu: i32) -> bool {
        -self.p <= nu && nu <= self.q
    }

    /// Row-major flat index of a spatial or frequency slot.
    pub fn flat(&self, slot: [usize; 2]) -> usize {
        match self.dim {
            1 => slot[0],
            _ => slot[0] * self.samples_per_axis() + slot[1],
        }
    }

    pub fn unflat(&self, idx: usize) -> [usize; 2] {
        match self.dim {
            1 => [idx, 0],
            _ => {
                let n = self.samples_per_axis();
                [idx / n, idx % n]
            }
        }
    }

    /// Spatial position of a flat sample index.
    pub fn position(&self, idx: usize) -> [f64; 2] {
        let s = self.unflat(idx);
        let h = self.spacing();
        [s[0] as f64 * h, s[1] as f64 * h]
    }

    /// Signed frequency integer of a slot along one axis.
    pub fn slot_to_freq(&self, slot: usize) -> i64 {
        let n = self.samples_per_axis();
        if slot < n / 2 {
            slot as i64
        } else {
            slot as i64 - n as i64
        }
    }

    /// Slot of a (wrapped) frequency integer along one axis.
    pub fn freq_to_slot(&self, k: i64) -> usize {
        k.rem_euclid(self.samples_per_axis() as i64) as usize
    }

    /// Whether a frequency integer lies inside `[-N/2, N/2)`.
    pub fn freq_in_band(&self, k: i64) -> bool {
        let half = (self.samples_per_axis() / 2) as i64;
        -half <= k && k < half
    }

    /// Signed frequency lattice point of a flat spectral index.
    pub fn freq_point(&self, idx: usize) -> Lattice {
        let s = self.unflat(idx);
        match self.dim {
            1 => [self.slot_to_freq(s[0]), 0],
            _ => [self.slot_to_freq(s[0]), self.slot_to_freq(s[1])],
        }
    }

    /// Flat spectral index of a frequency lattice point (wrapped).
    pub fn freq_index(&self, k: Lattice) -> usize {
        match self.dim {
            1 => self.freq_to_slot(k[0]),
            _ => self.flat([self.freq_to_slot(k[0]), self.freq_to_slot(k[1])]),
        }
    }

    /// Real frequency of a lattice point.
    pub fn freq_value(&self, k: Lattice) -> [f64; 2] {
        let d = self.freq_spacing();
        [k[0] as f64 * d, k[1] as f64 * d]
    }

    /// Nearest frequency lattice point at or below a real frequency, or
    /// `None` when the value is not exactly on the lattice.
    pub fn freq_lattice_of(&self, xi: &[f64]) -> Option<Lattice> {
        let mut out = [0i64; 2];
        for (j, &v) in xi.iter().take(self.dim).enumerate() {
            let scaled = v * self.side();
            if scaled.fract() != 0.0 {
                return None;
            }
            out[j] = scaled as i64;
        }
        Some(out)
    }

    /// Spatial lattice point of a real position, or `None` when off-lattice.
    pub fn spatial_lattice_of(&self, x: &[f64]) -> Option<Lattice> {
        let mut out = [0i64; 2];
        for (j, &v) in x.iter().take(self.dim).enumerate() {
            let scaled = v / self.spacing();
            if scaled.fract() != 0.0 {
                return None;
            }
            out[j] = scaled as i64;
        }
        Some(out)
    }

    /// Flat spatial index of a (wrapped) spatial lattice point.
    pub fn spatial_index(&self, k: Lattice) -> usize {
        let n = self.samples_per_axis() as i64;
        match self.dim {
            1 => k[0].rem_euclid(n) as usize,
            _ => self.flat([k[0].rem_euclid(n) as usize, k[1].rem_euclid(n) as usize]),
        }
    }

    /// Euclidean distance between two points in the torus metric.
    pub fn torus_distance(&self, x: &[f64; 2], y: &[f64; 2]) -> f64 {
        let side = self.side();
        let mut acc = 0.0;
        for j in 0..self.dim {
            let d = wrap_delta(x[j] - y[j], side);
            acc += d * d;
        }
        acc.sqrt()
    }

    /// Sup-norm distance in the torus metric.
    pub fn torus_sup_distance(&self, x: &[f64; 2], y: &[f64; 2]) -> f64 {
        let side = self.side();
        (0..self.dim).map(|j| wrap_delta(x[j] - y[j], side).abs()).fold(0.0, f64::max)
    }

    /// Same torus, spacing halved.
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.dim, self.p, self.q + 1)
    }
}

/// Representative of `d` modulo `side` in `[-side/2, side/2)`.
pub fn wrap_delta(d: f64, side: f64) -> f64 {
    let r = d.rem_euclid(side);
    if r >= side / 2.0 {
        r - side
    } else {
        r
    }
}

/// Exact `2^e` for moderate exponents.
pub fn pow2(e: i32) -> f64 {
    2f64.powi(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_dimensions_and_sizes() {
        assert!(GridSpec::new(3, 0, 4).is_err());
        assert!(GridSpec::new(1, 0, 0).is_err());
        assert!(GridSpec::new(2, 6, 6).is_err());
        assert!(GridSpec::new(2, 0, 5).is_ok());
    }

    #[test]
    fn frequency_slots_round_trip() {
        let g = GridSpec::new(1, 2, 2).unwrap();
        assert_eq!(g.samples_per_axis(), 16);
        for slot in 0..16 {
            let k = g.slot_to_freq(slot);
            assert!(g.freq_in_band(k));
            assert_eq!(g.freq_to_slot(k), slot);
        }
        assert_eq!(g.slot_to_freq(8), -8);
        assert_eq!(g.nyquist(), 2.0);
    }

    #[test]
    fn torus_metric_wraps() {
        let g = GridSpec::new(1, 0, 4).unwrap();
        let d = g.torus_distance(&[0.05, 0.0], &[0.95, 0.0]);
        assert!((d - 0.1).abs() < 1e-12);
    }
}
