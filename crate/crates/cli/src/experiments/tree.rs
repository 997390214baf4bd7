//! Density/size selection and the single-tree estimate.

use wavetile::random::{random_field, Envelope};
use wavetile::symbol::Symbol;
use wavetile::treeselect::{
    count_exact, count_greedy, random_tile_set, random_tree_instance, tree_estimate_check, Instance,
};
use wavetile::GridSpec;

use crate::config::ExperimentConfig;
use crate::report::{ExperimentReport, Measurement, Table};
use crate::Result;

/// Largest subset handed to the exact Count.
pub const EXACT_SUBSET: usize = 10;
/// Allowed per-tree ratio of refined to coarse tree constants, either way.
pub const DRIFT: f64 = 2.0;

pub fn envelope() -> Envelope {
    Envelope { width: 2.0 }
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("tree");
    let grid = GridSpec::new(1, 4, 7)?;
    let fine = grid.refined()?;
    let a = if cfg.dim == 1 { Symbol::by_name(cfg.symbol_name(), &grid)? } else { Symbol::Sign };

    let mut table = Table::new(
        "partitions",
        &["trial", "tiles", "alpha_hat", "beta_hat", "levels", "max_scaled_count", "greedy", "exact"],
    );
    let (mut density_ok, mut size_ok, mut ledger_ok, mut count_ok) = (true, true, true, true);
    let (mut alpha, mut beta, mut scaled) = (0.0f64, 0.0f64, 0.0f64);
    for t in 0..cfg.trials as u64 {
        let (set, cd) = random_tile_set(&grid, cfg.seed, t)?;
        let f = random_field(&grid, envelope(), cfg.seed, t);
        let inst = Instance::new(&cd, &f, &set)?;
        let d = inst.density_partition(set.tiles());
        let s = inst.size_partition(set.tiles())?;
        let l = inst.decompose(set.tiles())?;
        density_ok &= d.holds();
        size_ok &= s.holds();
        ledger_ok &= l.bounds_hold() && l.is_partition_of(set.tiles());
        alpha = alpha.max(d.alpha_hat);
        beta = beta.max(s.beta_hat);
        scaled = scaled.max(l.max_scaled_count());
        let sub = &set.tiles()[..set.len().min(EXACT_SUBSET)];
        let greedy = count_greedy(sub);
        let exact = count_exact(sub, &grid)?;
        count_ok &= exact <= greedy * (1.0 + 1e-12);
        table.push(vec![
            t as f64,
            set.len() as f64,
            d.alpha_hat,
            s.beta_hat,
            l.levels.len() as f64,
            l.max_scaled_count(),
            greedy,
            exact,
        ]);
    }
    let n = cfg.trials;
    r.push(Measurement::holds("density_partition", "light_part_bound", density_ok).on(n, grid));
    r.push(Measurement::record("density_partition", "alpha_hat", alpha).on(n, grid));
    r.push(Measurement::holds("size_partition", "small_part_bound", size_ok).on(n, grid));
    r.push(Measurement::record("size_partition", "beta_hat", beta).on(n, grid));
    r.push(Measurement::holds("level_decomposition", "ledger_bounds_and_partition", ledger_ok).on(n, grid));
    r.push(Measurement::record("level_decomposition", "max_scaled_count", scaled).on(n, grid));
    r.push(Measurement::holds("tree_count", "greedy_dominates_exact", count_ok).on(n, grid));
    r.tables.push(table);

    let mut table = Table::new(
        "trees",
        &["trial", "gamma_coarse", "gamma_fine", "f1_aligned", "f1_random", "j_measure"],
    );
    let (mut passes, mut gamma, mut f1a, mut f1r, mut jm) = (true, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for t in 0..cfg.trials as u64 {
        let mut g = [0.0; 2];
        let mut last = None;
        for (k, gr) in [grid, fine].iter().enumerate() {
            let (tree, cd) = random_tree_instance(gr, cfg.seed, t)?;
            let f = random_field(gr, envelope(), cfg.seed, t);
            let rep = tree_estimate_check(&tree, &cd, &f, &a, cfg.seed)?;
            passes &= rep.passes();
            g[k] = rep.gamma_hat;
            gamma = gamma.max(rep.gamma_hat);
            f1a = f1a.max(rep.f1_aligned);
            f1r = f1r.max(rep.f1_random);
            jm = jm.max(rep.j_measure);
            last = Some(rep);
        }
        if g[0] > 0.0 {
            lo = lo.min(g[1] / g[0]);
            hi = hi.max(g[1] / g[0]);
        }
        let rep = last.expect("two grids");
        table.push(vec![t as f64, g[0], g[1], rep.f1_aligned, rep.f1_random, rep.j_measure]);
    }
    let sym = a.name();
    r.push(Measurement::holds("tree_estimate", "finite_and_nested", passes).on(n, grid).symbol(sym));
    r.push(Measurement::record("tree_estimate", "gamma_hat", gamma).on(n, grid).symbol(sym));
    r.push(Measurement::at_least("tree_estimate", "gamma_drift_min", lo, 1.0 / DRIFT).on(n, fine).symbol(sym));
    r.push(Measurement::at_most("tree_estimate", "gamma_drift_max", hi, DRIFT).on(n, fine).symbol(sym));
    r.push(Measurement::record("tree_energy", "f1_aligned", f1a).on(n, grid).symbol(sym));
    r.push(Measurement::record("tree_energy", "f1_random", f1r).on(n, grid).symbol(sym));
    r.push(Measurement::record("tree_stopping_cubes", "j_measure", jm).on(n, grid).symbol(sym));
    r.tables.push(table);
    Ok(r)
}
