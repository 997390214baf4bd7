//! Model operator norms and Bessel constants.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use wavetile::grid::{pow2, Lattice};
use wavetile::modelop::{bessel_constant, generation_cube, operator_norm_estimate, selects, TileSet};
use wavetile::random::{random_field, Envelope};
use wavetile::wavepacket::{check_representable, PacketBank};
use wavetile::{DyadicCube, GridSpec, Tile};

use super::{random_frequency, rng_for};
use crate::config::ExperimentConfig;
use crate::report::{ExperimentReport, Measurement, Table};
use crate::Result;

/// Power iteration may sit this far below the dense eigenvalue.
pub const ORACLE_GAP: f64 = 0.02;
pub const NORM_SPREAD: f64 = 10.0;
pub const BESSEL_SPREAD: f64 = 1.5;
/// Refined Bessel constants may exceed the coarse ceiling by this factor.
pub const BESSEL_REFINEMENT: f64 = 1.1;
pub const BESSEL_ITERATIONS: usize = 50;

/// Largest eigenvalue of the Gram matrix `<phi_t, phi_s>` of the tiles that
/// select `xi`, from materialized packets. This is `||A_{xi,P}||`.
pub fn dense_norm(bank: &PacketBank, xi: Lattice, tiles: &TileSet) -> Result<f64> {
    let grid = *bank.grid();
    let fields = tiles
        .tiles()
        .iter()
        .filter(|t| selects(t, xi, &grid))
        .map(|t| Ok(bank.get(t)?.field()))
        .collect::<Result<Vec<_>>>()?;
    let k = fields.len();
    if k == 0 {
        return Ok(0.0);
    }
    let mut g = DMatrix::<Complex64>::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let v = fields[j].inner(&fields[i])?;
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    Ok(g.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max))
}

/// A random set of 10 to 50 representable tiles on `grid`, about half of
/// which select `xi`.
pub fn random_tiles(rng: &mut impl Rng, grid: &GridSpec, xi: Lattice) -> TileSet {
    let n = grid.dim();
    let p = grid.box_exponent();
    let (lo, hi) = (-p, grid.resolution_exponent() - 1);
    let size = rng.random_range(10..=50);
    let mut tiles = Vec::new();
    while tiles.len() < size {
        let nu = rng.random_range(lo..=hi);
        let count = 1i64 << (nu + p);
        let m: Vec<i64> = (0..n).map(|_| rng.random_range(0..count)).collect();
        let omega = if rng.random_bool(0.5) {
            generation_cube(xi, -nu, grid)
        } else {
            let band = ((grid.nyquist() / pow2(nu)).ceil() as i64).max(1);
            let mf: Vec<i64> = (0..n).map(|_| rng.random_range(-band..band)).collect();
            DyadicCube::new(n, -nu, &mf).ok()
        };
        let Some(omega) = omega else { continue };
        let Ok(spatial) = DyadicCube::new(n, nu, &m) else { continue };
        let Ok(t) = Tile::from_cubes(spatial, omega) else { continue };
        if check_representable(&t, grid).is_ok() {
            tiles.push(t);
        }
    }
    TileSet::new(tiles)
}

/// Grid of the model-operator experiment.
pub fn model_grid() -> GridSpec {
    GridSpec::new(1, 4, 6).expect("valid grid")
}

/// The `t`-th `(xi, P)` draw of the norm study.
pub fn draw_pair(cfg: &ExperimentConfig, t: u64) -> (Lattice, TileSet) {
    let grid = model_grid();
    let mut rng = rng_for(cfg, 0x3e7a, t);
    let xi = random_frequency(&mut rng, &grid);
    (xi, random_tiles(&mut rng, &grid, xi))
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("modelop");
    let grid = model_grid();
    let bank = PacketBank::new(grid);
    let unit = bank.get(&Tile::new(0, &[0], &[0])?)?.norm_sqr();

    let pairs = 2 * cfg.trials;
    let mut table = Table::new("norms", &["trial", "selected", "power_iteration", "dense"]);
    let mut gap = 0.0f64;
    let mut above = 0.0f64;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let mut used = 0;
    for t in 0..pairs as u64 {
        let (xi, tiles) = draw_pair(cfg, t);
        let selected = tiles.tiles().iter().filter(|s| selects(s, xi, &grid)).count();
        let est = operator_norm_estimate(&bank, xi, &tiles, 1, cfg.seed ^ t)?;
        let dense = dense_norm(&bank, xi, &tiles)?;
        table.push(vec![t as f64, selected as f64, est, dense]);
        if selected == 0 {
            continue;
        }
        used += 1;
        gap = gap.max((dense - est) / dense);
        above = above.max((est - dense) / dense);
        lo = lo.min(dense / unit);
        hi = hi.max(dense / unit);
    }
    r.push(Measurement::at_most("model_operator_norm", "power_iteration_gap", gap, ORACLE_GAP).on(used, grid));
    r.push(Measurement::at_most("model_operator_norm", "power_iteration_excess", above, 1e-9).on(used, grid));
    r.push(Measurement::record("model_operator_norm", "largest_norm", hi).on(used, grid));
    r.push(Measurement::below("model_operator_norm", "norm_spread", hi / lo, NORM_SPREAD).on(used, grid));
    r.tables.push(table);

    // Bessel constants on the grid and its refinement, same f and xi.
    let fine = grid.refined()?;
    let envelope = Envelope { width: 2.0 };
    let mut table = Table::new("bessel", &["trial", "coarse", "fine"]);
    let (mut lo, mut hi, mut fine_hi) = (f64::INFINITY, 0.0f64, 0.0f64);
    let mut empty = 0;
    for t in 0..cfg.trials as u64 {
        let mut rng = rng_for(cfg, 0xbe55, t);
        let xi = random_frequency(&mut rng, &grid);
        let c = bessel_constant(xi, &random_field(&grid, envelope, cfg.seed, t), BESSEL_ITERATIONS)?;
        let f = bessel_constant(xi, &random_field(&fine, envelope, cfg.seed, t), BESSEL_ITERATIONS)?;
        table.push(vec![t as f64, c, f]);
        // No packet selecting xi meets the spectrum of f (for instance xi = 0,
        // which lies in a first child at every scale).
        if c == 0.0 {
            empty += 1;
            continue;
        }
        lo = lo.min(c);
        hi = hi.max(c);
        fine_hi = fine_hi.max(f);
    }
    let used = cfg.trials - empty;
    r.push(Measurement::record("bessel", "empty_frame_operator", empty as f64).on(cfg.trials, grid));
    r.push(Measurement::record("bessel", "bessel_constant", hi).on(used, grid));
    r.push(Measurement::below("bessel", "bessel_spread", hi / lo, BESSEL_SPREAD).on(used, grid));
    r.push(Measurement::at_most("bessel", "bessel_refined_over_ceiling", fine_hi / hi, BESSEL_REFINEMENT).on(used, fine));
    r.tables.push(table);
    Ok(r)
}
