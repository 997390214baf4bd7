//! Cotlar-type comparison constants.

use num_complex::Complex64;
use wavetile::cotlar::{
    coarse_maximal, drift, verify_cotlar_lemmas, verify_trivial_cancellations, ComparisonReport,
    LEMMAS, PROPOSITION,
};
use wavetile::grid::pow2;
use wavetile::symbol::Symbol;
use wavetile::{Field, GridSpec};

use crate::config::ExperimentConfig;
use crate::report::{ExperimentReport, Measurement, Table};
use crate::Result;

pub const CANCELLATION_TOLERANCE: f64 = 1e-10;
/// Allowed ratio of refined to coarse constants, either way.
pub const DRIFT: f64 = 2.0;

/// The one-dimensional symbol used for the comparison draws.
pub fn draw_symbol(cfg: &ExperimentConfig) -> Result<Symbol> {
    let grid = GridSpec::new(1, 6, 5)?;
    Ok(if cfg.dim == 1 { Symbol::by_name(cfg.symbol_name(), &grid)? } else { Symbol::Sign })
}

pub fn lemma_reports(a: &Symbol, grid: &GridSpec, trials: usize, seed: u64) -> Result<Vec<ComparisonReport>> {
    let mut ids: Vec<&str> = LEMMAS.to_vec();
    ids.push(PROPOSITION);
    Ok(verify_cotlar_lemmas(a, grid, &ids, trials, seed)?)
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("cotlar");
    let a = draw_symbol(cfg)?;
    let grid = GridSpec::new(1, 6, 5)?;
    let fine = grid.refined()?;
    let trials = 2 * cfg.trials;
    let coarse = lemma_reports(&a, &grid, trials, cfg.seed)?;
    let again = lemma_reports(&a, &grid, trials, cfg.seed)?;
    let refined = lemma_reports(&a, &fine, trials, cfg.seed)?;
    let same = coarse.iter().zip(&again).all(|(x, y)| {
        x.ratios.len() == y.ratios.len()
            && x.ratios.iter().zip(&y.ratios).all(|(u, v)| u.to_bits() == v.to_bits())
    });
    r.push(Measurement::holds("cotlar_comparison", "seed_reproducible", same).on(trials, grid).symbol(a.name()));
    let mut table = Table::new("ratios", &["lemma", "trial", "coarse", "fine"]);
    for (k, ((c, f), (_, d))) in coarse.iter().zip(&refined).zip(drift(&coarse, &refined)).enumerate() {
        let anchor = if c.lemma == PROPOSITION {
            "cotlar_pointwise".to_string()
        } else {
            format!("cotlar_{}", c.lemma)
        };
        r.push(Measurement::holds(&anchor, "finite", c.is_finite() && f.is_finite()).on(c.trials, grid).symbol(a.name()));
        r.push(Measurement::record(&anchor, "max_ratio", c.max_ratio).on(c.trials, grid).symbol(a.name()));
        r.push(Measurement::within(&anchor, "refinement_drift", d, 1.0 / DRIFT, DRIFT).on(f.trials, fine).symbol(a.name()));
        for (t, (x, y)) in c.ratios.iter().zip(&f.ratios).enumerate() {
            table.push(vec![k as f64, t as f64, *x, *y]);
        }
    }
    r.tables.push(table);

    for c in verify_trivial_cancellations(&a, &grid, cfg.trials, cfg.seed)? {
        r.push(
            Measurement::at_most("cotlar_cancellation", &c.case, c.max_lhs, CANCELLATION_TOLERANCE)
                .on(c.trials, grid)
                .symbol(a.name()),
        );
    }

    // M_{>=b} 1 = 2^n exactly.
    let mut exact = true;
    for (n, p, q) in [(1, 4, 3), (2, 3, 2)] {
        let g = GridSpec::new(n, p, q)?;
        let one = Field::from_fn(g, |_| Complex64::new(1.0, 0.0));
        for b in [g.spacing(), 0.5, 1.0, 3.0, pow2(p - 1)] {
            let m = coarse_maximal(&one, b)?;
            exact &= m.values().iter().all(|v| v.re == pow2(n as i32) && v.im == 0.0);
        }
    }
    r.push(Measurement::holds("coarse_maximal", "constant_is_two_to_the_n", exact));
    Ok(r)
}
