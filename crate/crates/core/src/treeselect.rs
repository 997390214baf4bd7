//! Density, size and count of tile sets, the light/heavy and small/large
//! partitions, the level decomposition built from them, the functional
//! `Sum(P)` and the diagnostics of the single-tree estimate.
//!
//! All quantities are exact finite sums on the grid. `Count` is always the
//! greedy upper bound (tops are the maximal tiles); an exhaustive cover is
//! available for small sets as an oracle.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, SpectralField};
use crate::geometry::{partition_j, tile_le, DyadicCube, Tile, Tree};
use crate::grid::{pow2, GridSpec, Lattice};
use crate::modelop::TileSet;
use crate::random::trial_rng;
use crate::symbol::{apply_packet_symbol, Symbol};
use crate::wavepacket::PacketBank;

/// Exponent `20n` of the density weight is `DENSITY_DECAY * n`.
pub const DENSITY_DECAY: i32 = 20;

/// Largest set handed to the exhaustive cover.
pub const EXACT_COUNT_LIMIT: usize = 12;

/// Levels below the start after which the decomposition stops descending.
pub const LEVEL_LIMIT: i32 = 400;

/// The set `E` (a union of grid cells, measure at most 1) and the frequency
/// selection `N` at every grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceData {
    grid: GridSpec,
    cells: Vec<usize>,
    choice: Vec<Lattice>,
}

/// A dyadic block of `E` on which `N` is constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub cube: DyadicCube,
    pub choice: Lattice,
}

impl ChoiceData {
    pub fn new(grid: GridSpec, cells: Vec<usize>, choice: Vec<Lattice>) -> Result<Self> {
        if choice.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "N has {} samples, grid has {}",
                choice.len(),
                grid.len()
            )));
        }
        let cells: Vec<usize> = cells.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        if cells.last().is_some_and(|&c| c >= grid.len()) {
            return Err(Error::InvalidArgument("cell index outside the grid".into()));
        }
        let measure = cells.len() as f64 * grid.cell_volume();
        if measure > 1.0 + 1e-12 {
            return Err(Error::InvalidArgument(format!("|E| = {measure} exceeds 1")));
        }
        Ok(Self { grid, cells, choice })
    }

    pub fn empty(grid: GridSpec) -> Self {
        Self { grid, cells: Vec::new(), choice: vec![[0, 0]; grid.len()] }
    }

    /// `E` as a union of blocks with `N` constant on each; later blocks win
    /// on overlaps. `N` is zero off `E`.
    pub fn from_blocks(grid: GridSpec, blocks: &[Block]) -> Result<Self> {
        let mut choice = vec![[0, 0]; grid.len()];
        let mut cells = BTreeSet::new();
        for (idx, slot) in choice.iter_mut().enumerate() {
            let x = grid.position(idx);
            if let Some(b) = blocks.iter().rev().find(|b| b.cube.contains_point(&x[..grid.dim()])) {
                *slot = b.choice;
                cells.insert(idx);
            }
        }
        Self::new(grid, cells.into_iter().collect(), choice)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Flat indices of the cells of `E`, increasing.
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn choice(&self, idx: usize) -> Lattice {
        self.choice[idx]
    }

    pub fn measure(&self) -> f64 {
        self.cells.len() as f64 * self.grid.cell_volume()
    }

    pub fn indicator(&self) -> Field {
        Field::indicator(self.grid, self.cells.iter().copied())
    }

    /// Cells of `E ∩ N^{-1}[omega]`.
    pub fn cells_in(&self, omega: &DyadicCube) -> impl Iterator<Item = usize> + '_ {
        let p = self.grid.box_exponent();
        let omega = *omega;
        self.cells.iter().copied().filter(move |&c| omega.contains_freq(self.choice[c], p))
    }

    /// Cells of `E_{s(2^n)}`.
    pub fn selected_cells(&self, s: &Tile) -> Vec<usize> {
        self.cells_in(&s.last_freq_child()).collect()
    }
}

/// `dense(s) = |I_s|^{-1} ∫_{E ∩ N^{-1}[omega_s]} (1 + |x - c(I_s)| / l(I_s))^{-20n} dx`.
pub fn dense_of(s: &Tile, cd: &ChoiceData) -> f64 {
    let grid = cd.grid();
    let c = s.spatial().center();
    let l = s.spatial().side_length();
    let power = -DENSITY_DECAY * grid.dim() as i32;
    let total: f64 = cd
        .cells_in(s.frequency())
        .map(|i| (1.0 + grid.torus_distance(&grid.position(i), &c) / l).powi(power))
        .sum();
    total * grid.cell_volume() / s.spatial_volume()
}

/// The `i`-trees considered by `Size` are indexed by `2 <= i <= 2^n`.
fn size_indices(dim: usize) -> std::ops::RangeInclusive<usize> {
    2..=(1usize << dim)
}

/// `size(T0) = (sum_{s in T0} |<f, phi_s>|^2 / |I_t|)^{1/2}` for an `i`-tree.
pub fn size_of(tree: &Tree, i: usize, f: &Field) -> Result<f64> {
    let dim = tree.top().dim();
    if !size_indices(dim).contains(&i) || !tree.is_i_tree(i) {
        return Err(Error::InvalidTree(format!("not a {i}-tree")));
    }
    let bank = PacketBank::new(*f.grid());
    let spec = f.fourier();
    let mut acc = 0.0;
    for s in tree.tiles() {
        acc += bank.get(s)?.coefficient(&spec).norm_sqr();
    }
    Ok((acc / tree.top().spatial_volume()).sqrt())
}

/// The `i`-subtree of `tiles` below `t`: every `s <= t` with
/// `omega_{t(i)} ⊆ omega_{s(i)}`.
fn i_subtree<'a>(tiles: &'a [Tile], t: &'a Tile, i: usize) -> impl Iterator<Item = &'a Tile> + 'a {
    let top_child = t.freq_child(i);
    tiles.iter().filter(move |s| tile_le(s, t) && s.freq_child(i).contains(&top_child))
}

/// The maximal elements of a tile set in the tile order.
pub fn maximal_tiles(tiles: &[Tile]) -> Vec<Tile> {
    tiles
        .iter()
        .filter(|t| !tiles.iter().any(|u| u != *t && tile_le(t, u)))
        .copied()
        .collect()
}

/// Greedy `Count`: the maximal tiles are the tops, every other tile sits
/// below one of them.
pub fn count_greedy(tiles: &[Tile]) -> f64 {
    maximal_tiles(tiles).iter().map(Tile::spatial_volume).sum()
}

/// Smallest `|I_t|` of a tile dominating every member of a block, if any.
fn cover_cost(block: &[Tile], p: i32) -> Option<f64> {
    let narrow = block.iter().min_by_key(|s| s.scale())?;
    if !block.iter().all(|s| s.frequency().contains(narrow.frequency())) {
        return None;
    }
    // Descend from the whole torus while all spatial cubes share an ancestor.
    let mut scale = -p;
    while scale < narrow.scale() {
        let next = scale + 1;
        let a = block[0].spatial().ancestor(next)?;
        if block.iter().any(|s| s.spatial().ancestor(next) != Some(a)) {
            break;
        }
        scale = next;
    }
    Some(pow2(-scale * block[0].dim() as i32))
}

/// Exact `Count`: the cheapest cover of `tiles` by trees with arbitrary
/// tops, by dynamic programming over subsets.
pub fn count_exact(tiles: &[Tile], grid: &GridSpec) -> Result<f64> {
    let k = tiles.len();
    if k > EXACT_COUNT_LIMIT {
        return Err(Error::InvalidArgument(format!("{k} tiles exceed the exhaustive limit")));
    }
    let full = (1usize << k) - 1;
    let cost: Vec<Option<f64>> = (0..=full)
        .map(|mask| {
            let block: Vec<Tile> = (0..k).filter(|b| mask >> b & 1 == 1).map(|b| tiles[b]).collect();
            cover_cost(&block, grid.box_exponent())
        })
        .collect();
    let mut best = vec![f64::INFINITY; full + 1];
    best[0] = 0.0;
    for mask in 1..=full {
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        // Enumerate blocks containing the lowest element.
        let mut sub = rest;
        loop {
            let block = sub | low;
            if let Some(c) = cost[block] {
                let v = c + best[mask ^ block];
                if v < best[mask] {
                    best[mask] = v;
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    Ok(best[full])
}

/// The top and index attaining a subtree size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeWitness {
    pub top: Tile,
    pub index: usize,
    pub size: f64,
}

/// Per-tile data for one `(E, N, f)`: densities and packet coefficients.
#[derive(Debug, Clone)]
pub struct Instance {
    grid: GridSpec,
    norm: f64,
    dense: BTreeMap<Tile, f64>,
    coef: BTreeMap<Tile, Complex64>,
}

impl Instance {
    pub fn new(cd: &ChoiceData, f: &Field, tiles: &TileSet) -> Result<Self> {
        if f.grid() != cd.grid() {
            return Err(Error::GridMismatch("field and choice data differ".into()));
        }
        let grid = *f.grid();
        let bank = PacketBank::new(grid);
        let spec = f.fourier();
        let rows: Vec<(Tile, f64, Complex64)> = tiles
            .tiles()
            .par_iter()
            .map(|t| Ok((*t, dense_of(t, cd), bank.get(t)?.coefficient(&spec))))
            .collect::<Result<_>>()?;
        let mut dense = BTreeMap::new();
        let mut coef = BTreeMap::new();
        for (t, d, c) in rows {
            dense.insert(t, d);
            coef.insert(t, c);
        }
        Ok(Self { grid, norm: f.l2_norm(), dense, coef })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `||f||_2`.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn tiles(&self) -> TileSet {
        self.coef.keys().copied().collect()
    }

    fn lookup<T: Copy>(map: &BTreeMap<Tile, T>, t: &Tile) -> T {
        *map.get(t).unwrap_or_else(|| panic!("{t:?} is not part of the instance"))
    }

    pub fn dense(&self, t: &Tile) -> f64 {
        Self::lookup(&self.dense, t)
    }

    /// `<f, phi_t>`.
    pub fn coefficient(&self, t: &Tile) -> Complex64 {
        Self::lookup(&self.coef, t)
    }

    /// `Dense(P) = sup_s dense(s)`.
    pub fn dense_sup(&self, tiles: &[Tile]) -> f64 {
        tiles.iter().map(|t| self.dense(t)).fold(0.0, f64::max)
    }

    /// Size of every `i`-subtree with top in `tiles`.
    fn subtree_sizes<'a>(&'a self, tiles: &'a [Tile]) -> impl Iterator<Item = SizeWitness> + 'a {
        let dim = self.grid.dim();
        tiles.iter().flat_map(move |t| {
            size_indices(dim).map(move |i| {
                let acc: f64 = i_subtree(tiles, t, i).map(|s| self.coefficient(s).norm_sqr()).sum();
                SizeWitness { top: *t, index: i, size: (acc / t.spatial_volume()).sqrt() }
            })
        })
    }

    /// `Size(P)`: the largest `i`-subtree size over tops in `P`, with its
    /// witness.
    pub fn size_sup(&self, tiles: &[Tile]) -> Option<SizeWitness> {
        self.subtree_sizes(tiles)
            .fold(None, |best: Option<SizeWitness>, w| match best {
                Some(b) if b.size >= w.size => Some(b),
                _ => Some(w),
            })
    }

    pub fn size(&self, tiles: &[Tile]) -> f64 {
        self.size_sup(tiles).map_or(0.0, |w| w.size)
    }

    /// Light/heavy split at a quarter of `Dense(T)`.
    pub fn density_partition(&self, tiles: &[Tile]) -> DensityPartition {
        let dense = self.dense_sup(tiles);
        if dense == 0.0 {
            return DensityPartition {
                dense,
                light: tiles.to_vec(),
                heavy: Vec::new(),
                light_dense: 0.0,
                count: 0.0,
                alpha_hat: 0.0,
            };
        }
        let marked: Vec<Tile> = tiles.iter().filter(|t| self.dense(t) > dense / 4.0).copied().collect();
        let tops = maximal_tiles(&marked);
        let (heavy, light): (Vec<Tile>, Vec<Tile>) =
            tiles.iter().partition(|s| tops.iter().any(|t| tile_le(s, t)));
        let count = count_greedy(&heavy);
        DensityPartition {
            dense,
            light_dense: self.dense_sup(&light),
            light,
            heavy,
            count,
            alpha_hat: count * dense,
        }
    }

    /// Small/large split: trees whose `i`-subtree exceeds half of `Size(T)`
    /// are removed one top at a time.
    pub fn size_partition(&self, tiles: &[Tile]) -> Result<SizePartition> {
        let size = self.size(tiles);
        let mut small = tiles.to_vec();
        let mut large = Vec::new();
        let mut steps = 0;
        if size > 0.0 {
            loop {
                let candidates: Vec<Tile> = self
                    .subtree_sizes(&small)
                    .filter(|w| w.size > size / 2.0)
                    .map(|w| w.top)
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                if candidates.is_empty() {
                    break;
                }
                if steps == tiles.len() {
                    return Err(Error::InvalidArgument("size selection did not terminate".into()));
                }
                steps += 1;
                let top = maximal_tiles(&candidates)
                    .into_iter()
                    .min_by(selection_order)
                    .expect("a finite candidate set has maximal elements");
                let (tree, rest): (Vec<Tile>, Vec<Tile>) = small.iter().partition(|s| tile_le(s, &top));
                large.extend(tree);
                small = rest;
            }
        }
        large.sort();
        let count = count_greedy(&large);
        let beta_hat = if self.norm > 0.0 { count * size * size / (self.norm * self.norm) } else { 0.0 };
        Ok(SizePartition { size, small_size: self.size(&small), small, large, steps, count, beta_hat })
    }

    /// The level decomposition `P = ⊔ P_j` with `Dense(U_j) <= 4^j` and
    /// `Size(U_j) <= 2^j ||f||`.
    pub fn decompose(&self, tiles: &[Tile]) -> Result<DecompositionLedger> {
        let mut ledger = DecompositionLedger { start: None, norm: self.norm, levels: Vec::new(), terminal: Vec::new() };
        let dense = self.dense_sup(tiles);
        let size = self.size(tiles);
        let Some(start) = start_level(dense, size, self.norm) else {
            ledger.terminal = tiles.to_vec();
            return Ok(ledger);
        };
        ledger.start = Some(start);
        let mut rest = tiles.to_vec();
        let mut j = start;
        while !rest.is_empty() {
            let dense = self.dense_sup(&rest);
            let size = self.size(&rest);
            if (dense == 0.0 && size == 0.0) || j < start - LEVEL_LIMIT {
                ledger.terminal = rest;
                break;
            }
            let dense_big = dense > pow4(j - 1);
            let size_big = size > pow2(j - 1) * self.norm;
            let mut chosen = BTreeSet::new();
            let mut alpha_hat = None;
            let mut beta_hat = None;
            if dense_big {
                let d = self.density_partition(&rest);
                alpha_hat = Some(d.alpha_hat);
                chosen.extend(d.heavy);
            }
            if size_big {
                let s = self.size_partition(&rest)?;
                beta_hat = Some(s.beta_hat);
                chosen.extend(s.large);
            }
            let case = match (dense_big, size_big) {
                (false, false) => LevelCase::Empty,
                (false, true) => LevelCase::Large,
                (true, false) => LevelCase::Heavy,
                (true, true) => LevelCase::HeavyAndLarge,
            };
            let chosen: Vec<Tile> = chosen.into_iter().collect();
            rest.retain(|t| chosen.binary_search(t).is_err());
            let count = count_greedy(&chosen);
            ledger.levels.push(LevelRecord {
                level: j - 1,
                residual_dense: dense,
                residual_size: size,
                dense_bound: pow4(j),
                size_bound: pow2(j) * self.norm,
                case,
                count,
                scaled_count: count * pow4(j - 1),
                alpha_hat,
                beta_hat,
                tiles: chosen,
            });
            j -= 1;
        }
        Ok(ledger)
    }
}

fn pow4(j: i32) -> f64 {
    pow2(2 * j)
}

/// Smallest `j` with `dense <= 4^j` and `size <= 2^j norm`.
fn start_level(dense: f64, size: f64, norm: f64) -> Option<i32> {
    let mut level: Option<i32> = None;
    if dense > 0.0 {
        let mut j = (dense.log2() / 2.0).ceil() as i32;
        while pow4(j) < dense {
            j += 1;
        }
        while pow4(j - 1) >= dense {
            j -= 1;
        }
        level = Some(j);
    }
    if size > 0.0 && norm > 0.0 {
        let r = size / norm;
        let mut j = r.log2().ceil() as i32;
        while pow2(j) * norm < size {
            j += 1;
        }
        while pow2(j - 1) * norm >= size {
            j -= 1;
        }
        level = Some(level.map_or(j, |l| l.max(j)));
    }
    level
}

/// Lexicographically smallest `c(omega_t)`, then `c(I_t)`, then tile order.
fn selection_order(a: &Tile, b: &Tile) -> Ordering {
    let key = |t: &Tile| (t.frequency().center(), t.spatial().center());
    let (fa, sa) = key(a);
    let (fb, sb) = key(b);
    fa.partial_cmp(&fb)
        .unwrap_or(Ordering::Equal)
        .then(sa.partial_cmp(&sb).unwrap_or(Ordering::Equal))
        .then(a.cmp(b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityPartition {
    /// `Dense(T)`.
    pub dense: f64,
    pub light: Vec<Tile>,
    pub heavy: Vec<Tile>,
    pub light_dense: f64,
    /// Greedy `Count(T_heavy)`.
    pub count: f64,
    /// `Count(T_heavy) Dense(T)`.
    pub alpha_hat: f64,
}

impl DensityPartition {
    pub fn holds(&self) -> bool {
        self.light_dense <= self.dense / 4.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizePartition {
    /// `Size(T)`.
    pub size: f64,
    pub small: Vec<Tile>,
    pub large: Vec<Tile>,
    pub small_size: f64,
    pub steps: usize,
    /// Greedy `Count(T_large)`.
    pub count: f64,
    /// `Count(T_large) Size(T)^2 / ||f||^2`.
    pub beta_hat: f64,
}

impl SizePartition {
    pub fn holds(&self) -> bool {
        self.small_size <= self.size / 2.0
    }
}

/// Which pieces form `P_{j-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelCase {
    Empty,
    Large,
    Heavy,
    HeavyAndLarge,
}

/// One step `U_j -> P_{j-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    /// `j - 1`, the level of the emitted set.
    pub level: i32,
    /// `Dense(U_j)` and `Size(U_j)` with their bounds `4^j`, `2^j ||f||`.
    pub residual_dense: f64,
    pub residual_size: f64,
    pub dense_bound: f64,
    pub size_bound: f64,
    pub case: LevelCase,
    pub tiles: Vec<Tile>,
    /// Greedy `Count(P_{j-1})` and `Count(P_{j-1}) 4^{j-1}`.
    pub count: f64,
    pub scaled_count: f64,
    pub alpha_hat: Option<f64>,
    pub beta_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionLedger {
    /// `j_0`; `None` when every tile has zero density and zero size.
    pub start: Option<i32>,
    pub norm: f64,
    pub levels: Vec<LevelRecord>,
    /// Tiles never selected: density and size both vanish on them.
    pub terminal: Vec<Tile>,
}

impl DecompositionLedger {
    pub fn bounds_hold(&self) -> bool {
        self.levels.iter().all(|r| {
            r.residual_dense <= r.dense_bound * (1.0 + 1e-12) && r.residual_size <= r.size_bound * (1.0 + 1e-12)
        })
    }

    /// Whether the levels and the terminal set partition `tiles` exactly.
    pub fn is_partition_of(&self, tiles: &[Tile]) -> bool {
        let mut seen: Vec<Tile> = self.levels.iter().flat_map(|r| r.tiles.iter()).chain(&self.terminal).copied().collect();
        let total = seen.len();
        seen.sort();
        seen.dedup();
        let mut want = tiles.to_vec();
        want.sort();
        want.dedup();
        seen.len() == total && seen == want
    }

    /// `max_j Count(P_j) 4^j`.
    pub fn max_scaled_count(&self) -> f64 {
        self.levels.iter().map(|r| r.scaled_count).fold(0.0, f64::max)
    }
}

/// Convenience wrapper: the level decomposition of `P` for `(E, N, f)`.
pub fn corollary_decomposition(tiles: &TileSet, cd: &ChoiceData, f: &Field) -> Result<DecompositionLedger> {
    Instance::new(cd, f, tiles)?.decompose(tiles.tiles())
}

/// `<psi_s^{N(.)}, chi_{E_{s(2^n)}}>` with `psi_s^xi = a(x, D - xi) phi_s`,
/// one operator application per distinct value of `N` on `E_{s(2^n)}`.
pub fn pairing(s: &Tile, cd: &ChoiceData, a: &Symbol, bank: &PacketBank) -> Result<Complex64> {
    pairing_on(s, &cd.selected_cells(s), cd, a, bank)
}

fn pairing_on(s: &Tile, cells: &[usize], cd: &ChoiceData, a: &Symbol, bank: &PacketBank) -> Result<Complex64> {
    if cells.is_empty() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let grid = cd.grid();
    let mut groups: BTreeMap<Lattice, Vec<usize>> = BTreeMap::new();
    for &c in cells {
        groups.entry(cd.choice(c)).or_default().push(c);
    }
    let packet = bank.get(s)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for (xi, idx) in groups {
        let psi = apply_packet_symbol(a, &packet, &grid.freq_value(xi)[..grid.dim()])?;
        acc += idx.iter().map(|&i| psi.values()[i]).sum::<Complex64>();
    }
    Ok(acc * grid.cell_volume())
}

/// `Sum(P) = sum_s |<f, phi_s>| |<psi_s^{N(.)}, chi_{E_{s(2^n)}}>|`.
pub fn sum_functional(tiles: &TileSet, cd: &ChoiceData, f: &Field, a: &Symbol) -> Result<f64> {
    if f.grid() != cd.grid() {
        return Err(Error::GridMismatch("field and choice data differ".into()));
    }
    let bank = PacketBank::new(*f.grid());
    let spec = f.fourier();
    let terms: Vec<f64> = tiles
        .tiles()
        .par_iter()
        .map(|s| {
            let cells = cd.selected_cells(s);
            if cells.is_empty() {
                return Ok(0.0);
            }
            let c = bank.get(s)?.coefficient(&spec);
            if c.norm() == 0.0 {
                return Ok(0.0);
            }
            Ok(c.norm() * pairing_on(s, &cells, cd, a, &bank)?.norm())
        })
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum())
}

/// Diagnostics of one tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEstimateReport {
    pub tiles: usize,
    pub sum: f64,
    pub dense: f64,
    pub size: f64,
    pub top_volume: f64,
    /// `Sum / (Dense Size |I_t|)`; zero when the product vanishes.
    pub gamma_hat: f64,
    /// `Dense Size = 0` while `Sum` is not negligible.
    pub degenerate: bool,
    /// `||F_1||^2 / (|I_t| Size^2)` with phase-aligned and random `alpha_s`.
    pub f1_aligned: f64,
    pub f1_random: f64,
    /// `max_J |J ∩ ⋃_{|I_s| > 2^n |J|} E_{s(2^n)}| / (Dense |J|)`.
    pub j_measure: f64,
    pub j_cubes: usize,
    /// Points where the `omega_+ / omega_-` chain fails to nest.
    pub nesting_violations: usize,
}

impl TreeEstimateReport {
    pub fn passes(&self) -> bool {
        !self.degenerate
            && [self.gamma_hat, self.f1_aligned, self.f1_random, self.j_measure].iter().all(|v| v.is_finite())
            && self.nesting_violations == 0
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// `||sum_s alpha_s c_s phi_s||_2^2`.
fn f1_energy(tree: &Tree, inst: &Instance, bank: &PacketBank, alpha: impl Fn(usize, Complex64) -> Complex64) -> Result<f64> {
    let mut spec = SpectralField::zeros(*bank.grid());
    for (k, s) in tree.tiles().iter().enumerate() {
        let c = inst.coefficient(s);
        bank.get(s)?.accumulate(alpha(k, c) * c, &mut spec);
    }
    Ok(spec.l2_norm().powi(2))
}

/// Whether `omega_-` and `omega_+` nest around every active tile at `x`.
fn nests(active: &[&Tile]) -> bool {
    // l(omega_s) = 2^scale, so the widest frequency cube has the largest scale.
    let Some(wide) = active.iter().max_by_key(|s| s.scale()) else {
        return true;
    };
    let Some(narrow) = active.iter().min_by_key(|s| s.scale()) else {
        return true;
    };
    let plus = wide.frequency();
    let minus = narrow.last_freq_child();
    plus.contains(&minus)
        && active.iter().all(|s| {
            plus.contains(s.frequency()) && s.last_freq_child().contains(&minus) && s.frequency().contains(&minus)
        })
}

/// `Sum(T)` against `Dense(T) Size(T) |I_t|`, with the `F_1` energy, the
/// measure of the large-tile part of `E` on each cube of `J(T)`, and the
/// nesting of `omega_± (x; J)`.
pub fn tree_estimate_check(tree: &Tree, cd: &ChoiceData, f: &Field, a: &Symbol, seed: u64) -> Result<TreeEstimateReport> {
    if tree.is_empty() {
        return Err(Error::InvalidTree("empty tree".into()));
    }
    let grid = *cd.grid();
    let set: TileSet = tree.tiles().iter().copied().collect();
    let inst = Instance::new(cd, f, &set)?;
    let tiles = set.tiles();
    let sum = sum_functional(&set, cd, f, a)?;
    let dense = inst.dense_sup(tiles);
    let size = inst.size(tiles);
    let top_volume = tree.top().spatial_volume();
    let scale = dense * size * top_volume;
    let degenerate = scale == 0.0 && sum > 1e-12 * f.l2_norm().max(1.0);

    let bank = PacketBank::new(grid);
    let aligned = f1_energy(tree, &inst, &bank, |_, c| if c.norm() > 0.0 { c.conj() / c.norm() } else { c })?;
    let mut rng = trial_rng(seed, 0x7ee5);
    let draws: Vec<Complex64> = tree
        .tiles()
        .iter()
        .map(|_| Complex64::from_polar(rng.random::<f64>().sqrt(), std::f64::consts::TAU * rng.random::<f64>()))
        .collect();
    let random = f1_energy(tree, &inst, &bank, |k, _| draws[k])?;
    let energy_scale = top_volume * size * size;

    let n = grid.dim();
    let cubes = partition_j(tree, &grid)?;
    let mut j_measure: f64 = 0.0;
    let mut violations = 0;
    for q in &cubes {
        let big: Vec<&Tile> = tiles.iter().filter(|s| s.spatial_volume() > pow2(n as i32) * q.volume()).collect();
        if big.is_empty() {
            continue;
        }
        let mut hits = 0usize;
        for &c in cd.cells() {
            let x = grid.position(c);
            if !q.contains_point(&x[..n]) {
                continue;
            }
            let xi = cd.choice(c);
            let active: Vec<&Tile> =
                big.iter().copied().filter(|s| s.last_freq_child().contains_freq(xi, grid.box_exponent())).collect();
            if active.is_empty() {
                continue;
            }
            hits += 1;
            if !nests(&active) {
                violations += 1;
            }
        }
        let m = hits as f64 * grid.cell_volume();
        j_measure = j_measure.max(if dense > 0.0 { m / (dense * q.volume()) } else if m > 0.0 { f64::INFINITY } else { 0.0 });
    }

    Ok(TreeEstimateReport {
        tiles: tiles.len(),
        sum,
        dense,
        size,
        top_volume,
        gamma_hat: ratio(sum, scale),
        degenerate,
        f1_aligned: ratio(aligned, energy_scale),
        f1_random: ratio(random, energy_scale),
        j_measure,
        j_cubes: cubes.len(),
        nesting_violations: violations,
    })
}

/// `N(x) = argmax_xi |op(xi)(x)|` over a finite frequency list (first
/// maximizer on ties), together with the pointwise maximum.
pub fn linearize(
    grid: &GridSpec,
    shifts: &[Lattice],
    mut op: impl FnMut(Lattice) -> Result<Field>,
) -> Result<(Vec<Lattice>, Field)> {
    let mut choice = vec![[0, 0]; grid.len()];
    let mut best = vec![f64::NEG_INFINITY; grid.len()];
    for &xi in shifts {
        let g = op(xi)?;
        if g.grid() != grid {
            return Err(Error::GridMismatch("operator output".into()));
        }
        for (i, v) in g.values().iter().enumerate() {
            if v.norm() > best[i] {
                best[i] = v.norm();
                choice[i] = xi;
            }
        }
    }
    let values = best.into_iter().map(|b| Complex64::new(b.max(0.0), 0.0)).collect();
    Ok((choice, Field::new(*grid, values)?))
}

/// Scale range of random trees: the coarsest representable scale and the
/// next two. The finest intervals must hold at least 16 samples so that the
/// density weight is resolved.
fn tree_scales(grid: &GridSpec) -> Result<(i32, i32)> {
    let p = grid.box_exponent();
    let q = grid.resolution_exponent();
    let top = 4 - p;
    let finest = top + 2;
    if finest > q - 4 {
        return Err(Error::Grid(format!("grid (p={p}, q={q}) too coarse for random trees")));
    }
    Ok((top, finest))
}

fn random_cube(rng: &mut impl Rng, dim: usize, scale: i32, p: i32) -> DyadicCube {
    let count = 1i64 << (scale + p);
    let idx = [rng.random_range(0..count), rng.random_range(0..count)];
    DyadicCube::new(dim, scale, &idx[..dim]).expect("dimension checked by the grid")
}

fn random_descendant(rng: &mut impl Rng, cube: &DyadicCube, scale: i32) -> DyadicCube {
    let mut c = *cube;
    while c.scale() < scale {
        c = c.child(rng.random_range(1..=(1usize << c.dim())));
    }
    c
}

/// A random tree whose tiles all share the frequency column of the top.
fn random_tree_with(rng: &mut impl Rng, grid: &GridSpec, top_cube: DyadicCube) -> Result<Tree> {
    let (coarse, finest) = tree_scales(grid)?;
    let n = grid.dim();
    // omega_t sits among the frequency cubes of side 2^coarse near the origin.
    let reach = 2i64;
    let fidx = [rng.random_range(-reach..reach), rng.random_range(-reach..reach)];
    let omega = DyadicCube::new(n, -coarse, &fidx[..n])?;
    let top = Tile::from_cubes(top_cube, omega)?;
    let mut tiles = Vec::new();
    if rng.random_bool(0.5) {
        tiles.push(top);
    }
    let k = rng.random_range(3..=10);
    for _ in 0..k {
        let nu = rng.random_range(coarse..=finest);
        let spatial = random_descendant(rng, &top_cube, nu);
        let frequency = omega.ancestor(-nu).expect("coarser frequency scale");
        tiles.push(Tile::from_cubes(spatial, frequency)?);
    }
    Tree::new(top, tiles)
}

/// Frequency lattice point drawn uniformly from a frequency cube.
fn random_in(rng: &mut impl Rng, omega: &DyadicCube, p: i32) -> Lattice {
    // Cube side 2^{-scale} holds 2^{p - scale} lattice points per axis.
    let per = 1i64 << (p - omega.scale());
    let mut k = [0i64; 2];
    for (j, kj) in k.iter_mut().enumerate().take(omega.dim()) {
        *kj = omega.index()[j] * per + rng.random_range(0..per);
    }
    k
}

/// Blocks of side `2^-(finest + 2)` near `near` (within its tripled
/// cube), total measure at most `budget`, with `N` drawn mostly from the
/// last frequency children of `tiles`.
fn random_blocks(
    rng: &mut impl Rng,
    grid: &GridSpec,
    near: &DyadicCube,
    tiles: &[Tile],
    budget: f64,
) -> Result<Vec<Block>> {
    let (_, finest) = tree_scales(grid)?;
    let n = grid.dim();
    let p = grid.box_exponent();
    let scale = finest + 2;
    let vol = pow2(-scale * n as i32);
    let count = ((budget / vol).floor() as usize).min(rng.random_range(4..=48));
    let span = 1i64 << (scale - near.scale());
    let wrap = 1i64 << (scale + p);
    let mut out = Vec::with_capacity(count);
    let mut used = BTreeSet::new();
    for _ in 0..count {
        let mut idx = [0i64; 2];
        for (j, v) in idx.iter_mut().enumerate().take(n) {
            *v = (near.index()[j] * span + rng.random_range(-span..2 * span)).rem_euclid(wrap);
        }
        if !used.insert(idx) {
            continue;
        }
        let cube = DyadicCube::new(n, scale, &idx[..n])?;
        let choice = if !tiles.is_empty() && rng.random_bool(0.8) {
            let s = tiles[rng.random_range(0..tiles.len())];
            random_in(rng, &s.last_freq_child(), p)
        } else {
            let wide = tiles.iter().min_by_key(|s| s.scale()).map(|s| *s.frequency());
            match wide {
                Some(w) => random_in(rng, &w.parent(), p),
                None => [0, 0],
            }
        };
        out.push(Block { cube, choice });
    }
    Ok(out)
}

/// A random tree with choice data concentrated around it. The draw depends
/// only on the torus and the scale range, so refining `q` keeps the tree and
/// the sets `E`, `N` unchanged.
pub fn random_tree_instance(grid: &GridSpec, seed: u64, trial: u64) -> Result<(Tree, ChoiceData)> {
    let mut rng = trial_rng(seed ^ 0x72ee_5e1e, trial);
    let (coarse, _) = tree_scales(grid)?;
    let top_cube = random_cube(&mut rng, grid.dim(), coarse, grid.box_exponent());
    let tree = random_tree_with(&mut rng, grid, top_cube)?;
    let blocks = random_blocks(&mut rng, grid, &top_cube, tree.tiles(), 1.0)?;
    Ok((tree, ChoiceData::from_blocks(*grid, &blocks)?))
}

/// A random tile set made of several overlapping random trees, with choice
/// data spread over their neighbourhoods.
pub fn random_tile_set(grid: &GridSpec, seed: u64, trial: u64) -> Result<(TileSet, ChoiceData)> {
    let mut rng = trial_rng(seed ^ 0x5e7_5e1e, trial);
    let (coarse, _) = tree_scales(grid)?;
    let trees = rng.random_range(2..=6);
    let mut tiles = BTreeSet::new();
    let mut blocks = Vec::new();
    let share = 1.0 / trees as f64;
    for _ in 0..trees {
        let top_cube = random_cube(&mut rng, grid.dim(), coarse, grid.box_exponent());
        let tree = random_tree_with(&mut rng, grid, top_cube)?;
        blocks.extend(random_blocks(&mut rng, grid, &top_cube, tree.tiles(), share)?);
        tiles.extend(tree.tiles().iter().copied());
    }
    Ok((tiles.into_iter().collect(), ChoiceData::from_blocks(*grid, &blocks)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_field, Envelope};

    fn t1(nu: i32, m: i64, mf: i64) -> Tile {
        Tile::new(nu, &[m], &[mf]).unwrap()
    }

    fn narrow_field(grid: &GridSpec, trial: u64) -> Field {
        random_field(grid, Envelope { width: 2.0 }, 11, trial)
    }

    #[test]
    fn density_approaches_the_closed_form() {
        // I_s of side 1/16 centred in a unit window of E, N inside omega_s.
        let grid = GridSpec::new(1, 1, 12).unwrap();
        let s = t1(4, 8, 0);
        let c = s.spatial().center()[0];
        let cells: Vec<usize> = (0..grid.len())
            .filter(|&i| {
                let x = grid.position(i)[0];
                x >= c - 0.5 && x < c + 0.5
            })
            .collect();
        let cd = ChoiceData::new(grid, cells, vec![[3, 0]; grid.len()]).unwrap();
        let d = dense_of(&s, &cd);
        assert!((d - 2.0 / 19.0).abs() < 1e-3, "{d}");
        assert_eq!(dense_of(&s, &ChoiceData::empty(grid)), 0.0);
        // N outside omega_s removes everything.
        let off = ChoiceData::new(grid, cd.cells().to_vec(), vec![[100, 0]; grid.len()]).unwrap();
        assert_eq!(dense_of(&s, &off), 0.0);
    }

    #[test]
    fn oversized_sets_are_rejected() {
        let grid = GridSpec::new(1, 2, 3).unwrap();
        let all: Vec<usize> = (0..grid.len()).collect();
        assert!(ChoiceData::new(grid, all, vec![[0, 0]; grid.len()]).is_err());
    }

    #[test]
    fn singleton_size_and_count() {
        let grid = GridSpec::new(1, 4, 7).unwrap();
        let s = t1(1, 3, 1);
        let f = narrow_field(&grid, 0);
        let cd = ChoiceData::empty(grid);
        let inst = Instance::new(&cd, &f, &TileSet::new([s])).unwrap();
        let want = inst.coefficient(&s).norm() / s.spatial_volume().sqrt();
        assert!((inst.size(&[s]) - want).abs() <= 1e-14 * want.max(1.0));
        assert_eq!(count_greedy(&[s]), s.spatial_volume());
        let tree = Tree::new(s, vec![s]).unwrap();
        assert!((size_of(&tree, 2, &f).unwrap() - want).abs() <= 1e-12);
        assert!(size_of(&tree, 1, &f).is_err());
        // A packet against itself.
        let phi = PacketBank::new(grid).get(&s).unwrap().field();
        let norm = phi.l2_norm();
        let got = size_of(&tree, 2, &phi).unwrap();
        assert!((got - norm * norm / s.spatial_volume().sqrt()).abs() < 1e-10);
    }

    #[test]
    fn chain_count_is_the_top() {
        let v = t1(0, 1, 0);
        let u = t1(2, 4, 0);
        assert!(tile_le(&u, &v));
        let grid = GridSpec::new(1, 4, 7).unwrap();
        assert_eq!(count_greedy(&[u, v]), v.spatial_volume());
        assert_eq!(count_exact(&[u, v], &grid).unwrap(), v.spatial_volume());
    }

    #[test]
    fn exact_count_can_use_outside_tops() {
        // Two sibling intervals with a common frequency cube share a top one
        // scale up.
        let grid = GridSpec::new(1, 4, 7).unwrap();
        let a = t1(1, 4, 0);
        let b = t1(1, 5, 0);
        assert_eq!(count_exact(&[a, b], &grid).unwrap(), 1.0);
        assert_eq!(count_greedy(&[a, b]), 1.0);
        // Disjoint frequency cubes cannot share a top.
        let c = t1(1, 4, 1);
        assert_eq!(count_exact(&[a, c], &grid).unwrap(), 1.0);
    }

    #[test]
    fn greedy_count_dominates_the_exact_count() {
        let grid = GridSpec::new(1, 4, 7).unwrap();
        for trial in 0..20 {
            let (tree, _) = random_tree_instance(&grid, 3, trial).unwrap();
            let (set, _) = random_tile_set(&grid, 3, trial).unwrap();
            for tiles in [tree.tiles().to_vec(), set.tiles().iter().take(EXACT_COUNT_LIMIT).copied().collect()] {
                let exact = count_exact(&tiles, &grid).unwrap();
                assert!(count_greedy(&tiles) >= exact - 1e-12);
                assert!(exact > 0.0);
            }
        }
    }

    #[test]
    fn partitions_meet_their_thresholds() {
        let grid = GridSpec::new(1, 4, 7).unwrap();
        for trial in 0..10 {
            let (set, cd) = random_tile_set(&grid, 5, trial).unwrap();
            let f = narrow_field(&grid, trial);
            let inst = Instance::new(&cd, &f, &set).unwrap();
            let d = inst.density_partition(set.tiles());
            assert!(d.holds());
            assert_eq!(d.light.len() + d.heavy.len(), set.len());
            let s = inst.size_partition(set.tiles()).unwrap();
            assert!(s.holds(), "{} > {}", s.small_size, s.size / 2.0);
            assert_eq!(s.small.len() + s.large.len(), set.len());
        }
    }

    #[test]
    fn partition_edge_cases() {
        let grid = GridSpec::new(1, 4, 7).unwrap();
        let s = t1(1, 3, 1);
        let f = narrow_field(&grid, 1);
        let inst = Instance::new(&ChoiceData::empty(grid), &f, &TileSet::new([s])).unwrap();
        let d = inst.density_partition(&[s]);
        assert_eq!((d.light.len(), d.heavy.len()), (1, 0));
        // The only subtree exceeds half of itself, so it is selected.
        let sp = inst.size_partition(&[s]).unwrap();
        assert_eq!((sp.small.len(), sp.large.len()), (0, 1));
        assert_eq!(sp.small_size, 0.0);
        let zero = Instance::new(&ChoiceData::empty(grid), &Field::zeros(grid), &TileSet::new([s])).unwrap();
        assert_eq!(zero.size_partition(&[s]).unwrap().small.len(), 1);
    }

    #[test]
    fn decomposition_partitions_the_set() {
        let grid = GridSpec::new(1, 4, 7).unwrap();
        for trial in 0..5 {
            let (set, cd) = random_tile_set(&grid, 9, trial).unwrap();
            let f = narrow_field(&grid, trial);
            let ledger = corollary_decomposition(&set, &cd, &f).unwrap();
            assert!(ledger.bounds_hold());
            assert!(ledger.is_partition_of(set.tiles()));
            assert!(ledger.max_scaled_count().is_finite());
        }
        let empty = corollary_decomposition(&TileSet::default(), &ChoiceData::empty(grid), &narrow_field(&grid, 0)).unwrap();
        assert!(empty.levels.is_empty() && empty.terminal.is_empty());
    }

    #[test]
    fn sum_for_the_identity_is_the_packet_integral() {
        let grid = GridSpec::new(1, 4, 7).unwrap();
        let s = t1(1, 5, 1);
        let xi = random_in(&mut trial_rng(0, 0), &s.last_freq_child(), 4);
        let blocks = [Block { cube: DyadicCube::new(1, 1, &[5]).unwrap(), choice: xi }];
        let cd = ChoiceData::from_blocks(grid, &blocks).unwrap();
        let f = narrow_field(&grid, 2);
        let a = Symbol::Identity { dim: 1 };
        let got = sum_functional(&TileSet::new([s]), &cd, &f, &a).unwrap();
        let bank = PacketBank::new(grid);
        let packet = bank.get(&s).unwrap();
        let phi = packet.field();
        let integral: Complex64 = cd.cells().iter().map(|&i| phi.values()[i]).sum::<Complex64>() * grid.cell_volume();
        let want = packet.coefficient(&f.fourier()).norm() * integral.norm();
        assert!((got - want).abs() <= 1e-12 * want.max(1e-300), "{got} vs {want}");
        assert_eq!(sum_functional(&TileSet::new([s]), &ChoiceData::empty(grid), &f, &a).unwrap(), 0.0);
    }

    #[test]
    fn sum_is_additive() {
        let grid = GridSpec::new(1, 4, 7).unwrap();
        let (set, cd) = random_tile_set(&grid, 2, 0).unwrap();
        let f = narrow_field(&grid, 0);
        let a = Symbol::Sign;
        let left: TileSet = set.tiles().iter().step_by(2).copied().collect();
        let right = set.difference(&left);
        let whole = sum_functional(&set, &cd, &f, &a).unwrap();
        let parts = sum_functional(&left, &cd, &f, &a).unwrap() + sum_functional(&right, &cd, &f, &a).unwrap();
        assert!((whole - parts).abs() <= 1e-12 * whole.max(1.0));
    }

    #[test]
    fn tree_reports_are_finite() {
        let grid = GridSpec::new(1, 4, 7).unwrap();
        for trial in 0..5 {
            let (tree, cd) = random_tree_instance(&grid, 4, trial).unwrap();
            let f = narrow_field(&grid, trial);
            let r = tree_estimate_check(&tree, &cd, &f, &Symbol::Sign, 4).unwrap();
            assert!(r.passes(), "{r:?}");
        }
    }

    #[test]
    fn linearization_attains_the_maximum() {
        let grid = GridSpec::new(1, 2, 4).unwrap();
        let f = narrow_field(&grid, 3);
        let shifts: Vec<Lattice> = (-3..=3).map(|k| [k, 0]).collect();
        let op = |xi: Lattice| Ok(f.modulate(xi).scale(Complex64::new(1.0 + xi[0] as f64 * 0.1, 0.0)));
        let (choice, best) = linearize(&grid, &shifts, op).unwrap();
        for i in 0..grid.len() {
            let v = op(choice[i]).unwrap().values()[i].norm();
            assert_eq!(v, best.values()[i].re);
        }
    }
}
