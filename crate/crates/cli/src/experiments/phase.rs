//! Phase multipliers.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use wavetile::grid::pow2;
use wavetile::phase::{verify_averaging_identity, PhaseMultipliers, PhaseSequences};
use wavetile::{Cube, Field, GridSpec};

use super::rng_for;
use crate::config::ExperimentConfig;
use crate::report::{ExperimentReport, Measurement, Table};
use crate::Result;

pub const M_AT_MINUS_HALF: (f64, f64) = (0.18, 0.20);
pub const DILATION_TOLERANCE: f64 = 1e-10;
pub const AVERAGING_TOLERANCE: f64 = 1e-6;
/// Number of sequence terms in the positivity check.
pub const PHASE_TERMS: usize = 64;

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("phase");
    let e = PhaseMultipliers::default();
    let origin = e.m(&[0.0]).abs().max(e.m(&[0.0, 0.0]).abs());
    r.push(Measurement::at_most("phase_multiplier", "m_at_origin", origin, 0.0));
    let half = e.m(&[-0.5]);
    r.push(Measurement::within("phase_multiplier", "m_at_minus_half", half, M_AT_MINUS_HALF.0, M_AT_MINUS_HALF.1));

    // M(2 xi) = M(xi) on random points of both dimensions.
    let mut worst = 0.0f64;
    for t in 0..cfg.trials as u64 {
        let mut rng = rng_for(cfg, 0xd11a, t);
        let rad = pow2(rng.random_range(-6..6)) * rng.random_range(1.0..2.0);
        let th = rng.random_range(0.0..2.0 * PI);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        for xi in [vec![sign * rad], vec![rad * th.cos(), rad * th.sin()]] {
            let twice: Vec<f64> = xi.iter().map(|v| 2.0 * v).collect();
            worst = worst.max((e.big_m(&twice)? - e.big_m(&xi)?).abs());
        }
    }
    r.push(Measurement::at_most("phase_multiplier", "dilation_invariance", worst, DILATION_TOLERANCE).on(2 * cfg.trials, GridSpec::new(1, 0, 1)?));

    // Averaging identity along Q_N = Q(0.35 2^N).
    let grid = GridSpec::new(1, 11, 2)?;
    let f = Field::from_fn(grid, |x| Complex64::from_polar(1.0, -PI * x[0]));
    let cubes: Vec<Cube> = (0..24).map(|n| Cube::centered(1, 0.35 * pow2(n))).collect::<wavetile::Result<_>>()?;
    let steps = verify_averaging_identity(&e, 0, &f, &cubes, 1)?;
    let mut table = Table::new("averaging", &["half_width", "samples", "relative_error"]);
    for s in &steps {
        table.push(vec![s.half_width, s.samples as f64, s.relative_error]);
    }
    let last = steps.last().map_or(f64::NAN, |s| s.relative_error);
    let decreasing = steps.windows(2).all(|w| w[1].relative_error < w[0].relative_error);
    r.push(Measurement::at_most("averaging_identity", "final_error", last, AVERAGING_TOLERANCE).on(steps.len(), grid));
    r.push(Measurement::holds("averaging_identity", "error_decreases", decreasing).on(steps.len(), grid));
    r.tables.push(table);

    // The combined multiplier stays positive on the annulus.
    let seq = PhaseSequences::default();
    let inf2 = e.m_k_annulus_inf(2, PHASE_TERMS, &seq, 360, 4)?;
    r.push(Measurement::at_least("phase_positivity", "annulus_infimum_n2", inf2, f64::MIN_POSITIVE));
    let inf1 = e.m_k_annulus_inf(1, 2, &PhaseSequences { reflect: true }, 1, 8)?;
    r.push(Measurement::at_least("phase_positivity", "annulus_infimum_n1_reflected", inf1, f64::MIN_POSITIVE).soft());
    Ok(r)
}
