use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use wavetile::cotlar::coarse_maximal;
use wavetile::geometry::tile_le;
use wavetile::modelop::{apply_a, generation_cube, operator_norm_estimate, selects, TileSet};
use wavetile::phase::PhaseMultipliers;
use wavetile::random::{random_field, white_field, Envelope};
use wavetile::symbol::{apply_symbol, modulated_maximal, Symbol};
use wavetile::treeselect::{random_tile_set, Instance};
use wavetile::wavepacket::{check_representable, PacketBank};
use wavetile::{DyadicCube, GridSpec, Tile};

fn tile_in(grid: &GridSpec) -> impl Strategy<Value = Tile> {
    let p = grid.box_exponent();
    let q = grid.resolution_exponent();
    let g = *grid;
    (-p..q).prop_flat_map(move |nu| {
        let count = 1i64 << (nu + p);
        let band = (g.nyquist() / 2f64.powi(nu)).ceil().max(1.0) as i64;
        (Just(nu), 0..count, -band..band)
    })
    .prop_map(|(nu, m, mf)| Tile::new(nu, &[m], &[mf]).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn plancherel_holds_on_random_grids(n in 1usize..=2, p in 0i32..3, q in 1i32..4, seed: u64) {
        let grid = GridSpec::new(n, p, q).unwrap();
        let f = white_field(&grid, seed, 0);
        let rel = (f.fourier().l2_norm() - f.l2_norm()).abs() / f.l2_norm();
        prop_assert!(rel < 1e-12);
        prop_assert!(f.weak_l2_norm() <= f.l2_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn tile_order_is_a_partial_order(
        a in tile_in(&GridSpec::new(1, 3, 3).unwrap()),
        b in tile_in(&GridSpec::new(1, 3, 3).unwrap()),
        c in tile_in(&GridSpec::new(1, 3, 3).unwrap()),
    ) {
        prop_assert!(tile_le(&a, &a));
        if tile_le(&a, &b) && tile_le(&b, &a) {
            prop_assert_eq!(a, b);
        }
        if tile_le(&a, &b) && tile_le(&b, &c) {
            prop_assert!(tile_le(&a, &c));
        }
        // Comparable tiles of equal scale coincide.
        if tile_le(&a, &b) && a.scale() == b.scale() {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn model_operator_is_positive_and_self_adjoint(seed: u64, k in -32i64..32) {
        let grid = GridSpec::new(1, 3, 5).unwrap();
        let bank = PacketBank::new(grid);
        let tiles: TileSet = (0..24u64)
            .filter_map(|t| {
                let nu = (t % 4) as i32;
                let m = ((seed >> (t % 32)) as i64).rem_euclid(1 << (nu + 3));
                let mf = (k >> nu) - (t as i64 % 3);
                let tile = Tile::new(nu, &[m], &[mf]).ok()?;
                check_representable(&tile, &grid).ok().map(|_| tile)
            })
            .collect();
        let xi = [k, 0];
        let f = white_field(&grid, seed, 1);
        let g = white_field(&grid, seed, 2);
        let af = apply_a(&bank, xi, &tiles, &f).unwrap();
        let ag = apply_a(&bank, xi, &tiles, &g).unwrap();
        let quad = af.inner(&f).unwrap();
        prop_assert!(quad.re >= -1e-12 && quad.im.abs() < 1e-10);
        let lhs = af.inner(&g).unwrap();
        let rhs = f.inner(&ag).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()));
    }

    #[test]
    fn maximal_function_dominates_the_unshifted_operator(seed: u64, trial in 0u64..1000) {
        let grid = GridSpec::new(1, 0, 7).unwrap();
        let f = random_field(&grid, Envelope::default(), seed, trial);
        let shifts: Vec<[i64; 2]> = (-16..16).map(|k| [k, 0]).collect();
        let g = modulated_maximal(&Symbol::Sign, &f, Some(&shifts)).unwrap();
        let h = apply_symbol(&Symbol::Sign, &f, &[0.0]).unwrap();
        for (a, b) in g.values().iter().zip(h.values()) {
            prop_assert!(a.re >= b.norm() - 1e-12);
        }
    }

    #[test]
    fn coarse_maximal_is_homogeneous(seed: u64, c in 0.1f64..10.0) {
        let grid = GridSpec::new(1, 3, 3).unwrap();
        let f = white_field(&grid, seed, 0);
        let a = coarse_maximal(&f, 0.5).unwrap();
        let b = coarse_maximal(&f.scale(Complex64::new(0.0, c)), 0.5).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((c * x.re - y.re).abs() <= 1e-12 * (1.0 + y.re));
        }
    }

    #[test]
    fn phase_multiplier_is_a_bump(x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let e = PhaseMultipliers::default();
        let v = e.m(&[x, y]);
        prop_assert!((0.0..=1.0).contains(&v));
        if x >= -0.15 || y >= -0.15 {
            prop_assert_eq!(v, 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn selection_partitions_meet_their_thresholds(seed: u64, trial in 0u64..1000) {
        let grid = GridSpec::new(1, 4, 7).unwrap();
        let (set, cd) = random_tile_set(&grid, seed, trial).unwrap();
        let f = random_field(&grid, Envelope { width: 2.0 }, seed, trial);
        let inst = Instance::new(&cd, &f, &set).unwrap();
        prop_assert!(inst.density_partition(set.tiles()).holds());
        prop_assert!(inst.size_partition(set.tiles()).unwrap().holds());
        let ledger = inst.decompose(set.tiles()).unwrap();
        prop_assert!(ledger.bounds_hold());
        prop_assert!(ledger.is_partition_of(set.tiles()));
    }
}

/// The power iteration never overshoots the Gram eigenvalue and lands close
/// to it.
#[test]
fn power_iteration_matches_the_gram_eigenvalue() {
    let grid = GridSpec::new(1, 3, 5).unwrap();
    let bank = PacketBank::new(grid);
    let xi = [-13, 0];
    let mut tiles = Vec::new();
    for nu in 0..4 {
        let Some(omega) = generation_cube(xi, -nu, &grid) else { continue };
        for m in 0..(1i64 << (nu + 3)).min(6) {
            // The selecting tile and its lower frequency neighbour.
            for d in [0, -1] {
                let w = DyadicCube::new(1, -nu, &[omega.index()[0] + d]).unwrap();
                let t = Tile::from_cubes(DyadicCube::new(1, nu, &[m]).unwrap(), w).unwrap();
                if check_representable(&t, &grid).is_ok() {
                    tiles.push(t);
                }
            }
        }
    }
    let chosen: Vec<Tile> = tiles.iter().filter(|t| selects(t, xi, &grid)).copied().collect();
    assert!(!chosen.is_empty());
    let fields: Vec<_> = chosen.iter().map(|t| bank.get(t).unwrap().field()).collect();
    let k = fields.len();
    let g = DMatrix::from_fn(k, k, |i, j| fields[j].inner(&fields[i]).unwrap());
    let top = g.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max);
    let est = operator_norm_estimate(&bank, xi, &TileSet::new(tiles), 2, 5).unwrap();
    assert!(est <= top * (1.0 + 1e-9), "{est} > {top}");
    assert!(est >= 0.98 * top, "{est} vs {top}");
}
