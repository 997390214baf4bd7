//! Plancherel and the Fourier commutation identities on random fields.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use wavetile::random::white_field;

use super::{random_frequency, rng_for};
use crate::config::ExperimentConfig;
use crate::report::{ExperimentReport, Measurement, Table};
use crate::Result;

pub const TOLERANCE: f64 = 1e-10;

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let grid = cfg.grid()?;
    let trials = 10 * cfg.trials;
    let n = grid.samples_per_axis() as i64;
    let mut table =
        Table::new("errors", &["trial", "plancherel", "roundtrip", "modulation", "translation"]);
    let mut worst = [0.0f64; 4];
    let mut weak_ok = true;
    for t in 0..trials as u64 {
        let f = white_field(&grid, cfg.seed, t);
        let norm = f.l2_norm();
        let spec = f.fourier();
        let plancherel = (spec.l2_norm() - norm).abs() / norm;
        let roundtrip = spec.inverse_fourier().sub(&f)?.l2_norm() / norm;

        let mut rng = rng_for(cfg, 0xf1e1d, t);
        let k = random_frequency(&mut rng, &grid);
        // F M_k f = T_k F f
        let lhs = f.modulate(k).fourier();
        let rhs = spec.translate(k);
        let modulation = relative_diff(lhs.values(), rhs.values());

        // F T_a f = e^{-2 pi i a.xi} F f, with `a` in samples
        let mut a = [0i64; 2];
        for v in a.iter_mut().take(grid.dim()) {
            *v = rng.random_range(0..n);
        }
        let lhs = f.translate(a).fourier();
        let rhs = spec.multiply(|k| {
            let phase = (a[0] * k[0] + a[1] * k[1]).rem_euclid(n);
            Complex64::from_polar(1.0, -2.0 * PI * phase as f64 / n as f64)
        });
        let translation = relative_diff(lhs.values(), rhs.values());

        weak_ok &= f.weak_l2_norm() <= norm * (1.0 + 1e-12);
        let row = [plancherel, roundtrip, modulation, translation];
        for (w, v) in worst.iter_mut().zip(row) {
            *w = w.max(v);
        }
        table.push([vec![t as f64], row.to_vec()].concat());
    }
    let mut r = ExperimentReport::new("field");
    let names = ["plancherel", "fourier_roundtrip", "modulation_commutes", "translation_commutes"];
    let anchors = ["plancherel", "plancherel", "fourier_commutation", "fourier_commutation"];
    for ((name, anchor), v) in names.iter().zip(anchors).zip(worst) {
        r.push(Measurement::at_most(anchor, name, v, TOLERANCE).on(trials, grid));
    }
    r.push(Measurement::holds("weak_l2", "weak_l2_below_l2", weak_ok).on(trials, grid));
    r.tables.push(table);
    Ok(r)
}

/// `|a - b| / |b|` in l2 of the coefficients.
fn relative_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let t: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    if t == 0.0 {
        s.sqrt()
    } else {
        (s / t).sqrt()
    }
}
