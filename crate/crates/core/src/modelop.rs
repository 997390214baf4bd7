//! Model sum operators `A_{xi,P}` and the generation operators `A_{eta,l}`.
//!
//! Everything is evaluated on the spectral side: a packet has a small
//! spectral support, so `<f, phi_s>` and `sum c_s phi_s` cost only that
//! support. A generation (all translates at one scale) collapses to the
//! Fourier multiplier `|Phi((xi - c(Q_(1))) / l(Q))|^2`.

use std::collections::BTreeSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, SpectralField};
use crate::geometry::{DyadicCube, Tile};
use crate::grid::{pow2, GridSpec, Lattice};
use crate::random::{random_field, Envelope};
use crate::wavepacket::{check_representable, phi_hat, PacketBank, CUTOFF};

/// A finite, canonically ordered set of tiles.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileSet {
    tiles: Vec<Tile>,
}

impl TileSet {
    pub fn new(tiles: impl IntoIterator<Item = Tile>) -> Self {
        let set: BTreeSet<Tile> = tiles.into_iter().collect();
        Self { tiles: set.into_iter().collect() }
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    /// `[nu_min, nu_max]`, or `None` when empty.
    pub fn scale_range(&self) -> Option<(i32, i32)> {
        let lo = self.tiles.iter().map(Tile::scale).min()?;
        let hi = self.tiles.iter().map(Tile::scale).max()?;
        Some((lo, hi))
    }

    pub fn contains(&self, t: &Tile) -> bool {
        self.tiles.binary_search(t).is_ok()
    }

    pub fn union(&self, other: &TileSet) -> TileSet {
        TileSet::new(self.tiles.iter().chain(other.tiles.iter()).copied())
    }

    pub fn difference(&self, other: &TileSet) -> TileSet {
        TileSet::new(self.tiles.iter().filter(|t| !other.contains(t)).copied())
    }
}

impl FromIterator<Tile> for TileSet {
    fn from_iter<I: IntoIterator<Item = Tile>>(iter: I) -> Self {
        TileSet::new(iter)
    }
}

/// Whether the frequency integer `xi` lies in `omega_{s(2^n)}`.
pub fn selects(tile: &Tile, xi: Lattice, grid: &GridSpec) -> bool {
    tile.last_freq_child().contains_freq(xi, grid.box_exponent())
}

/// `F(A_{xi,P} f)` from `Ff`.
pub fn apply_a_spectral(
    bank: &PacketBank,
    xi: Lattice,
    tiles: &TileSet,
    spec: &SpectralField,
) -> Result<SpectralField> {
    let grid = *bank.grid();
    let mut out = SpectralField::zeros(grid);
    for t in tiles.tiles().iter().filter(|t| selects(t, xi, &grid)) {
        let p = bank.get(t)?;
        let c = p.coefficient(spec);
        p.accumulate(c, &mut out);
    }
    Ok(out)
}

/// `A_{xi,P} f = sum_{s in P, xi in omega_{s(2^n)}} <f, phi_s> phi_s`.
pub fn apply_a(bank: &PacketBank, xi: Lattice, tiles: &TileSet, f: &Field) -> Result<Field> {
    if f.grid() != bank.grid() {
        return Err(Error::GridMismatch("field and packet bank differ".into()));
    }
    Ok(apply_a_spectral(bank, xi, tiles, &f.fourier())?.inverse_fourier())
}

/// The frequency cube `Q_l(eta)` of side `2^-l` whose last child contains
/// `eta`, if any.
pub fn generation_cube(eta: Lattice, l: i32, grid: &GridSpec) -> Option<DyadicCube> {
    let n = grid.dim();
    let p = grid.box_exponent();
    // Cube at scale l+1 containing eta, in exact integer arithmetic.
    let e = l + 1 - p;
    let idx: Vec<i64> = (0..n)
        .map(|j| if e >= 0 { eta[j] << e } else { eta[j] >> (-e) })
        .collect();
    let child = DyadicCube::new(n, l + 1, &idx).ok()?;
    let parent = child.parent();
    (parent.child(1 << n) == child).then_some(parent)
}

/// The spatial scale range `l` (`l(I_s) = 2^l`) whose generation packets are
/// all representable near `eta`.
pub fn generation_in_range(eta: Lattice, l: i32, grid: &GridSpec) -> bool {
    match generation_cube(eta, l, grid) {
        Some(q) => Tile::from_cubes(
            DyadicCube::new(grid.dim(), -l, &vec![0; grid.dim()]).expect("valid cube"),
            q,
        )
        .and_then(|t| check_representable(&t, grid))
        .is_ok(),
        None => l <= grid.box_exponent() && -l <= grid.resolution_exponent() - 1,
    }
}

/// Spectral multiplier of `A_{eta,l}`, or `None` when no tile of that
/// generation selects `eta`.
pub fn generation_multiplier(
    eta: Lattice,
    l: i32,
    grid: &GridSpec,
) -> Result<Option<impl Fn(Lattice) -> f64>> {
    let Some(q) = generation_cube(eta, l, grid) else {
        return Ok(None);
    };
    let probe = Tile::from_cubes(
        DyadicCube::new(grid.dim(), -l, &vec![0; grid.dim()]).expect("valid cube"),
        q,
    )?;
    check_representable(&probe, grid)?;
    let c1 = q.child(1).center();
    let side = q.side_length();
    let d = grid.freq_spacing();
    let n = grid.dim();
    Ok(Some(move |k: Lattice| {
        let y = [(k[0] as f64 * d - c1[0]) / side, (k[1] as f64 * d - c1[1]) / side];
        let v = phi_hat(&y[..n]);
        v * v
    }))
}

/// `A_{eta,l} f` through its Fourier multiplier.
pub fn apply_a_generation(eta: Lattice, l: i32, f: &Field) -> Result<Field> {
    let grid = *f.grid();
    match generation_multiplier(eta, l, &grid)? {
        None => Ok(Field::zeros(grid)),
        Some(m) => {
            Ok(f.fourier().multiply(|k| Complex64::new(m(k), 0.0)).inverse_fourier())
        }
    }
}

/// Every tile with `|I_s| = 2^{ln}` on the torus whose last frequency child
/// contains `eta`.
pub fn generation_tiles(eta: Lattice, l: i32, grid: &GridSpec) -> Result<TileSet> {
    let Some(q) = generation_cube(eta, l, grid) else {
        return Ok(TileSet::default());
    };
    let count = 1i64 << (grid.box_exponent() - l);
    let n = grid.dim();
    let mut tiles = Vec::new();
    for a in 0..count {
        for b in 0..if n == 2 { count } else { 1 } {
            let sp = DyadicCube::new(n, -l, &[a, b][..n])?;
            let t = Tile::from_cubes(sp, q)?;
            check_representable(&t, grid)?;
            tiles.push(t);
        }
    }
    Ok(TileSet::new(tiles))
}

/// Power iteration on the positive operator `A_{xi,P}`; returns the largest
/// `||A f|| / ||f||` seen over `trials` seeded random starts.
pub fn operator_norm_estimate(
    bank: &PacketBank,
    xi: Lattice,
    tiles: &TileSet,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    const ITERATIONS: usize = 50;
    let grid = *bank.grid();
    let selected = TileSet::new(tiles.tiles().iter().filter(|t| selects(t, xi, &grid)).copied());
    if selected.is_empty() {
        return Ok(0.0);
    }
    let envelope = Envelope { width: pow2(grid.resolution_exponent() - 2) };
    let mut best = 0.0f64;
    for trial in 0..trials.max(1) {
        let mut v = random_field(&grid, envelope, seed, trial as u64).fourier();
        // Keep the start inside the span of the packets.
        v = apply_a_spectral(bank, xi, &selected, &v)?;
        for _ in 0..ITERATIONS {
            let norm = v.l2_norm();
            if norm == 0.0 {
                break;
            }
            let w = apply_a_spectral(bank, xi, &selected, &v)?;
            best = best.max(w.l2_norm() / norm);
            let scale = 1.0 / w.l2_norm().max(f64::MIN_POSITIVE);
            v = SpectralField::new(grid, w.values().iter().map(|x| x * scale).collect())?;
        }
    }
    Ok(best)
}

/// Frame bound of `{phi_s : xi in omega_{s(2^n)}}` over the scales
/// `l in scales`: the multiplier `sum_l |Phi_l|^2` of `sum_l A_{xi,l}`.
pub fn bessel_multiplier(
    xi: Lattice,
    scales: impl IntoIterator<Item = i32>,
    grid: &GridSpec,
) -> Result<SpectralField> {
    let mut out = vec![0.0f64; grid.len()];
    for l in scales {
        if let Some(m) = generation_multiplier(xi, l, grid)? {
            let Some(q) = generation_cube(xi, l, grid) else { continue };
            // Visit only the support box of this generation.
            let c1 = q.child(1).center();
            let reach = (CUTOFF * q.side_length() / grid.freq_spacing()).ceil() as i64;
            let k1 = grid.freq_lattice_of(&c1[..grid.dim()]).ok_or(Error::OffLattice("frequency"))?;
            let span = if grid.dim() == 2 { -reach..=reach } else { 0..=0 };
            for a in -reach..=reach {
                for b in span.clone() {
                    let k = [k1[0] + a, k1[1] + b];
                    out[grid.freq_index(k)] += m(k);
                }
            }
        }
    }
    SpectralField::new(*grid, out.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
}

/// Scales `l` whose full generation near `xi` is representable.
pub fn representable_generations(xi: Lattice, grid: &GridSpec) -> Vec<i32> {
    let lo = -(grid.resolution_exponent() - 1);
    let hi = grid.box_exponent();
    (lo..=hi)
        .filter(|&l| generation_cube(xi, l, grid).is_some() && generation_in_range(xi, l, grid))
        .collect()
}

/// `sum_s |<f, phi_s>|^2` over every representable tile selecting `xi`,
/// computed per generation.
pub fn bessel_sum(xi: Lattice, f: &Field) -> Result<f64> {
    let grid = *f.grid();
    let mult = bessel_multiplier(xi, representable_generations(xi, &grid), &grid)?;
    let spec = f.fourier();
    let s: f64 = spec
        .values()
        .iter()
        .zip(mult.values())
        .map(|(a, m)| a.norm_sqr() * m.re)
        .sum();
    Ok(s * grid.freq_cell_volume())
}

/// Power iteration of the frame operator started from `f`; converges to the
/// Bessel constant seen by `f`'s spectrum.
pub fn bessel_constant(xi: Lattice, f: &Field, iterations: usize) -> Result<f64> {
    let grid = *f.grid();
    let mult = bessel_multiplier(xi, representable_generations(xi, &grid), &grid)?;
    let mut w: Vec<f64> = f.fourier().values().iter().map(|v| v.norm_sqr()).collect();
    let mut ratio = 0.0;
    for _ in 0..iterations {
        let num: f64 = w.iter().zip(mult.values()).map(|(a, m)| a * m.re * m.re).sum();
        let den: f64 = w.iter().sum();
        if den == 0.0 {
            return Ok(0.0);
        }
        ratio = (num / den).sqrt();
        for (a, m) in w.iter_mut().zip(mult.values()) {
            *a *= m.re * m.re;
        }
        let s: f64 = w.iter().sum();
        if s == 0.0 {
            break;
        }
        for a in &mut w {
            *a /= s;
        }
    }
    Ok(ratio)
}
