//! The bump `Phi`, its difference `Psi`, and tile wave packets.
//!
//! Packets are stored by their spectral support, which is a small box of
//! frequency samples; full fields are materialized on demand.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, SpectralField};
use crate::geometry::{Cube, Tile};
use crate::grid::{pow2, GridSpec, Lattice};

/// Edge of the plateau of the 1-D profile.
pub const PLATEAU: f64 = 0.09;
/// Edge of the support of the 1-D profile.
pub const CUTOFF: f64 = 0.1;

fn glue(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// The even 1-D profile `g`: 1 on `[0, 0.09]`, 0 on `[0.1, inf)`, smooth.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile;

impl BumpProfile {
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.abs();
        if t <= PLATEAU {
            return 1.0;
        }
        if t >= CUTOFF {
            return 0.0;
        }
        let scale = 1.0 / (CUTOFF - PLATEAU);
        let a = glue((CUTOFF - t) * scale);
        let b = glue((t - PLATEAU) * scale);
        a / (a + b)
    }
}

/// `Phi(xi) = prod_j g(|xi_j|)`.
pub fn phi_hat(xi: &[f64]) -> f64 {
    xi.iter().map(|&t| BumpProfile.eval(t)).product()
}

/// `Psi(xi) = Phi(xi) - Phi(2 xi)`.
pub fn psi_hat(xi: &[f64]) -> f64 {
    let double: Vec<f64> = xi.iter().map(|t| 2.0 * t).collect();
    phi_hat(xi) - phi_hat(&double)
}

/// `Phi_Q(xi) = Phi((xi - c(Q)) / l(Q))`.
pub fn phi_cube(q: &Cube, xi: &[f64]) -> f64 {
    let c = q.center();
    let l = q.side_length();
    let y: Vec<f64> = (0..q.dim()).map(|j| (xi[j] - c[j]) / l).collect();
    phi_hat(&y)
}

/// `Phi` on the frequency lattice and `phi = F^{-1} Phi`.
pub fn build_phi(grid: &GridSpec) -> Result<(Field, SpectralField)> {
    if grid.freq_spacing() > PLATEAU {
        return Err(Error::Grid(format!(
            "frequency spacing {} does not resolve the plateau of Phi",
            grid.freq_spacing()
        )));
    }
    let spec = SpectralField::from_fn(*grid, |k| {
        let xi = grid.freq_value(k);
        Complex64::new(phi_hat(&xi[..grid.dim()]), 0.0)
    });
    Ok((spec.inverse_fourier(), spec))
}

/// `Psi` on the frequency lattice.
pub fn build_psi(grid: &GridSpec) -> SpectralField {
    SpectralField::from_fn(*grid, |k| {
        let xi = grid.freq_value(k);
        Complex64::new(psi_hat(&xi[..grid.dim()]), 0.0)
    })
}

/// `||Phi||_2^2` as a Riemann sum on the lattice of `grid`.
pub fn phi_norm_sqr(grid: &GridSpec) -> f64 {
    let (_, spec) = build_phi(grid).expect("grid resolves Phi");
    spec.values().iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.freq_cell_volume()
}

/// Outcome of the cube sandwich audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SandwichReport {
    pub points: usize,
    pub violations: usize,
    pub max_violation: f64,
}

/// Checks `chi_{(27/25)Q} <= Phi_{6Q} <= chi_{(6/5)Q}` on every lattice point
/// of a box containing `(6/5)Q`.
pub fn sandwich_check(q: &Cube, grid: &GridSpec) -> Result<SandwichReport> {
    if q.dim() != grid.dim() {
        return Err(Error::Dimension(q.dim()));
    }
    let six = q.dilate(6.0);
    let inner = q.dilate(27.0 / 25.0);
    let outer = q.dilate(6.0 / 5.0);
    let c = q.center();
    let reach = outer.half_width() + 2.0 * grid.freq_spacing();
    let lo: Vec<i64> = (0..q.dim())
        .map(|j| ((c[j] - reach) / grid.freq_spacing()).floor() as i64)
        .collect();
    let hi: Vec<i64> = (0..q.dim())
        .map(|j| ((c[j] + reach) / grid.freq_spacing()).ceil() as i64)
        .collect();
    let mut report = SandwichReport { points: 0, violations: 0, max_violation: 0.0 };
    let second = if q.dim() == 2 { (lo[1], hi[1]) } else { (0, 0) };
    for k0 in lo[0]..=hi[0] {
        for k1 in second.0..=second.1 {
            let xi = grid.freq_value([k0, k1]);
            let xi = &xi[..q.dim()];
            let v = phi_cube(&six, xi);
            let below = if inner.contains(xi) { 1.0 } else { 0.0 };
            let above = if outer.contains(xi) { 1.0 } else { 0.0 };
            let bad = (below - v).max(v - above).max(0.0);
            report.points += 1;
            if bad > 0.0 {
                report.violations += 1;
                report.max_violation = report.max_violation.max(bad);
            }
        }
    }
    Ok(report)
}

/// The sampled packet `phi_s`, held by its spectral support.
#[derive(Debug, Clone)]
pub struct WavePacket {
    tile: Tile,
    grid: GridSpec,
    /// `(flat spectral index, F phi_s)` over the support box.
    support: Vec<(usize, Complex64)>,
}

/// Frequency integer of the center of `omega_{s(1)}`.
fn first_child_center(tile: &Tile, grid: &GridSpec) -> Result<Lattice> {
    let child = tile.freq_child(1);
    let c = child.center();
    grid.freq_lattice_of(&c[..tile.dim()])
        .ok_or_else(|| Error::Unrepresentable(format!("{tile:?}: c(omega_s(1)) off the lattice")))
}

/// Checks that a tile's packet is resolved by the grid.
pub fn check_representable(tile: &Tile, grid: &GridSpec) -> Result<()> {
    let nu = tile.scale();
    let p = grid.box_exponent();
    let q = grid.resolution_exponent();
    if tile.dim() != grid.dim() {
        return Err(Error::Dimension(tile.dim()));
    }
    if nu < -p || nu > q - 1 {
        return Err(Error::Unrepresentable(format!("scale {nu} outside [{}, {}]", -p, q - 1)));
    }
    if PLATEAU * pow2(nu) < grid.freq_spacing() {
        return Err(Error::Unrepresentable(format!(
            "scale {nu} too coarse for frequency spacing 2^-{p}"
        )));
    }
    let count = 1i64 << (nu + p);
    if tile.spatial().index().iter().any(|&m| m < 0 || m >= count) {
        return Err(Error::Unrepresentable(format!("{tile:?}: spatial cube off the torus")));
    }
    let c1 = first_child_center(tile, grid)?;
    let reach = ((CUTOFF * pow2(nu)) / grid.freq_spacing()).ceil() as i64;
    for &c in c1.iter().take(tile.dim()) {
        if !grid.freq_in_band(c - reach) || !grid.freq_in_band(c + reach) {
            return Err(Error::Unrepresentable(format!("{tile:?}: spectrum leaves the band")));
        }
    }
    Ok(())
}

impl WavePacket {
    /// `F phi_s(xi) = l^{-n/2} Phi((xi - c1)/l) e^{-2 pi i c(I_s).(xi - c1)}`
    /// with `l = l(omega_s)` and `c1 = c(omega_{s(1)})`.
    pub fn new(tile: Tile, grid: &GridSpec) -> Result<Self> {
        check_representable(&tile, grid)?;
        let n = tile.dim();
        let l = pow2(tile.scale());
        let c1 = first_child_center(&tile, grid)?;
        let ci = tile.spatial().center();
        let reach = ((CUTOFF * l) / grid.freq_spacing()).ceil() as i64;
        let amp = l.powf(-(n as f64) / 2.0);
        let d = grid.freq_spacing();
        let mut support = Vec::new();
        let second = if n == 2 { -reach..=reach } else { 0..=0 };
        for a in -reach..=reach {
            for b in second.clone() {
                let off = [a as f64 * d, b as f64 * d];
                let v = phi_hat(&[off[0] / l, off[1] / l][..n]);
                if v == 0.0 {
                    continue;
                }
                let phase = -2.0 * PI * (ci[0] * off[0] + ci[1] * off[1]);
                let k = [c1[0] + a, c1[1] + b];
                support.push((grid.freq_index(k), Complex64::from_polar(amp * v, phase)));
            }
        }
        Ok(Self { tile, grid: *grid, support })
    }

    pub fn tile(&self) -> &Tile {
        &self.tile
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Nonzero spectral samples as `(flat index, value)`.
    pub fn support(&self) -> &[(usize, Complex64)] {
        &self.support
    }

    pub fn spectral(&self) -> SpectralField {
        let mut s = SpectralField::zeros(self.grid);
        for &(i, v) in &self.support {
            s.values_mut()[i] = v;
        }
        s
    }

    pub fn field(&self) -> Field {
        self.spectral().inverse_fourier()
    }

    /// `<f, phi_s>` from the spectrum of `f`.
    pub fn coefficient(&self, spec: &SpectralField) -> Complex64 {
        let s: Complex64 = self.support.iter().map(|&(i, v)| spec.values()[i] * v.conj()).sum();
        s * self.grid.freq_cell_volume()
    }

    /// Adds `c * F phi_s` into a spectrum.
    pub fn accumulate(&self, c: Complex64, spec: &mut SpectralField) {
        let vals = spec.values_mut();
        for &(i, v) in &self.support {
            vals[i] += c * v;
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.support.iter().map(|(_, v)| v.norm_sqr()).sum::<f64>() * self.grid.freq_cell_volume()
    }

    /// Maximum of `|phi_s(x)| |I_s|^{1/2} (1 + |x - c(I_s)| / l(I_s))^L`, with
    /// distances in the torus metric.
    pub fn decay_constant(&self, field: &Field, power: i32) -> f64 {
        let c = self.tile.spatial().center();
        let l = self.tile.spatial().side_length();
        let norm = self.tile.spatial_volume().sqrt();
        field
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let d = self.grid.torus_distance(&self.grid.position(i), &c);
                v.norm() * norm * (1.0 + d / l).powi(power)
            })
            .fold(0.0, f64::max)
    }
}

/// Concurrent cache of packets keyed by tile.
#[derive(Debug)]
pub struct PacketBank {
    grid: GridSpec,
    cache: RwLock<HashMap<Tile, Arc<WavePacket>>>,
}

impl PacketBank {
    pub fn new(grid: GridSpec) -> Self {
        Self { grid, cache: RwLock::new(HashMap::new()) }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn get(&self, tile: &Tile) -> Result<Arc<WavePacket>> {
        if let Some(p) = self.cache.read().expect("packet cache poisoned").get(tile) {
            return Ok(p.clone());
        }
        let p = Arc::new(WavePacket::new(*tile, &self.grid)?);
        self.cache.write().expect("packet cache poisoned").insert(*tile, p.clone());
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.cache.read().expect("packet cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The packet through the elementary operators on the field side:
/// `M_{c(omega_s(1))} T_{c(I_s)} D_{l(I_s)} phi`.
///
/// Only available when the translation and modulation are lattice moves and
/// the dilation is an expansion (`l(I_s) >= 1`), where every step is exact.
pub fn packet_via_field_ops(tile: &Tile, grid: &GridSpec) -> Result<Field> {
    check_representable(tile, grid)?;
    if tile.scale() > 0 {
        return Err(Error::Unrepresentable("compressing dilation is not exact".into()));
    }
    let (phi, _) = build_phi(grid)?;
    let d = phi.dilate(-tile.scale())?;
    let c = tile.spatial().center();
    let a = grid
        .spatial_lattice_of(&c[..tile.dim()])
        .ok_or(Error::OffLattice("spatial"))?;
    let k = first_child_center(tile, grid)?;
    Ok(d.translate(a).modulate(k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_sandwich() {
        let g = BumpProfile;
        assert_eq!(g.eval(0.0), 1.0);
        assert_eq!(g.eval(0.09), 1.0);
        assert_eq!(g.eval(-0.09), 1.0);
        assert_eq!(g.eval(0.1), 0.0);
        let mut last = 1.0;
        for i in 0..=100 {
            let v = g.eval(0.09 + 0.01 * i as f64 / 100.0);
            assert!((0.0..=1.0).contains(&v) && v <= last);
            last = v;
        }
    }

    #[test]
    fn phi_support_and_plateau() {
        assert_eq!(phi_hat(&[0.0, 0.0]), 1.0);
        assert_eq!(phi_hat(&[0.1, 0.0]), 0.0);
        assert_eq!(phi_hat(&[0.05, -0.2]), 0.0);
        assert_eq!(psi_hat(&[0.0]), 0.0);
    }

    #[test]
    fn build_phi_needs_fine_frequency_lattice() {
        assert!(build_phi(&GridSpec::new(1, 3, 4).unwrap()).is_err());
        let (_, spec) = build_phi(&GridSpec::new(1, 4, 4).unwrap()).unwrap();
        assert_eq!(spec.at([0, 0]).re, 1.0);
    }

    #[test]
    fn packet_norm_is_invariant_within_a_scale() {
        let grid = GridSpec::new(1, 5, 5).unwrap();
        let base = WavePacket::new(Tile::new(1, &[3], &[1]).unwrap(), &grid).unwrap();
        for (m, mf) in [(7, -4), (20, 3), (63, 0), (0, -7)] {
            let p = WavePacket::new(Tile::new(1, &[m], &[mf]).unwrap(), &grid).unwrap();
            assert!((p.norm_sqr() - base.norm_sqr()).abs() < 1e-14);
        }
    }

    #[test]
    fn packet_norm_across_scales_needs_a_resolved_lattice() {
        // Riemann sums of |Phi|^2 converge fast once the 0.01-wide transition
        // is sampled densely.
        let grid = GridSpec::new(1, 12, 2).unwrap();
        let a = WavePacket::new(Tile::new(0, &[5], &[1]).unwrap(), &grid).unwrap();
        let b = WavePacket::new(Tile::new(1, &[9], &[-1]).unwrap(), &grid).unwrap();
        assert!((a.norm_sqr() - b.norm_sqr()).abs() < 1e-11);
    }

    #[test]
    fn rejects_unrepresentable_tiles() {
        let grid = GridSpec::new(1, 4, 4).unwrap();
        assert!(WavePacket::new(Tile::new(-1, &[0], &[0]).unwrap(), &grid).is_err());
        assert!(WavePacket::new(Tile::new(0, &[16], &[0]).unwrap(), &grid).is_err());
        assert!(WavePacket::new(Tile::new(0, &[0], &[8]).unwrap(), &grid).is_err());
    }

    #[test]
    fn bank_returns_the_same_packet() {
        let grid = GridSpec::new(1, 4, 4).unwrap();
        let bank = PacketBank::new(grid);
        let t = Tile::new(0, &[1], &[2]).unwrap();
        let a = bank.get(&t).unwrap();
        let b = bank.get(&t).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(bank.len(), 1);
    }
}
