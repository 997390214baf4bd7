//! The modulated maximal operator `g = max_xi |a(x, D + xi) f|` on random
//! mean-zero fields: weak-type and L^p ratios over a refinement triple.

use wavetile::grid::Lattice;
use wavetile::random::{random_field, Envelope};
use wavetile::symbol::{apply_symbol, modulated_maximal, Symbol};
use wavetile::{Field, GridSpec};

use crate::config::ExperimentConfig;
use crate::report::{ExperimentReport, Measurement, Table};
use crate::{CliError, Result};

pub const LP_EXPONENTS: [f64; 3] = [4.0 / 3.0, 2.0, 4.0];
/// Allowed ratio between the largest and smallest per-grid maxima.
pub const DRIFT: f64 = 2.0;
pub const IDENTITY_TOLERANCE: f64 = 1e-10;

/// `sup_lambda lambda^2 |{g > lambda}| / ||f||_2^2`, evaluated exactly: with
/// `v_1 >= v_2 >= ...` the sorted values of `g`, the supremum is
/// `max_k v_k^2 k h^n`.
pub fn weak_type_ratio(g: &Field, f: &Field) -> f64 {
    let mut v: Vec<f64> = g.values().iter().map(|z| z.norm()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    let cell = g.grid().cell_volume();
    let best = v.iter().enumerate().map(|(k, x)| x * x * (k + 1) as f64 * cell).fold(0.0, f64::max);
    best / f.l2_norm().powi(2)
}

/// `||g||_p / ||f||_p` for `p > 1`.
pub fn lp_ratio(g: &Field, f: &Field, p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(CliError::Config(format!("L^p exponent {p} must exceed 1")));
    }
    Ok(g.lp_norm(p)? / f.lp_norm(p)?)
}

/// Width of the random-field envelope for a refinement triple.
pub fn envelope(coarse: &GridSpec) -> Envelope {
    Envelope { width: (0.1 * coarse.nyquist()).min(4.0) }
}

/// Modulation shifts: the in-band frequency lattice of the coarsest grid, so
/// every grid of the triple maximizes over the same set.
pub fn shifts(coarse: &GridSpec) -> Vec<Lattice> {
    (0..coarse.len()).map(|i| coarse.freq_point(i)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRow {
    pub weak: f64,
    pub lp: [f64; 3],
    /// `||a(x, D) f||_2 / ||f||_2`.
    pub strong: f64,
}

pub fn trial(name: &str, grid: &GridSpec, shifts: &[Lattice], env: Envelope, seed: u64, t: u64) -> Result<TrialRow> {
    let a = Symbol::by_name(name, grid)?;
    let f = random_field(grid, env, seed, t);
    let g = modulated_maximal(&a, &f, Some(shifts))?;
    let mut lp = [0.0; 3];
    for (v, p) in lp.iter_mut().zip(LP_EXPONENTS) {
        *v = lp_ratio(&g, &f, p)?;
    }
    let strong = apply_symbol(&a, &f, &vec![0.0; grid.dim()])?.l2_norm() / f.l2_norm();
    Ok(TrialRow { weak: weak_type_ratio(&g, &f), lp, strong })
}

pub struct Headline {
    pub symbol: String,
    pub grids: [GridSpec; 3],
    pub trials: usize,
    /// Per grid, per trial.
    pub rows: Vec<Vec<TrialRow>>,
    pub reproducible: bool,
}

impl Headline {
    pub fn compute(cfg: &ExperimentConfig, name: &str) -> Result<Self> {
        let grids = cfg.refinement_triple()?;
        let env = envelope(&grids[0]);
        let sh = shifts(&grids[0]);
        let mut rows = Vec::new();
        for g in &grids {
            rows.push(
                (0..cfg.trials as u64)
                    .map(|t| trial(name, g, &sh, env, cfg.seed, t))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        let again = trial(name, &grids[1], &sh, env, cfg.seed, 0)?;
        let reproducible = again.weak.to_bits() == rows[1][0].weak.to_bits()
            && again.lp.iter().zip(&rows[1][0].lp).all(|(a, b)| a.to_bits() == b.to_bits());
        Ok(Self { symbol: name.into(), grids, trials: cfg.trials, rows, reproducible })
    }

    fn maxima(&self, pick: impl Fn(&TrialRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(&pick).fold(f64::NEG_INFINITY, |a, b| if b.is_nan() { b } else { a.max(b) })).collect()
    }

    fn table(&self, name: &str) -> Table {
        let mut t = Table::new(name, &["q", "trial", "weak", "lp_4_3", "lp_2", "lp_4", "strong"]);
        for (g, rows) in self.grids.iter().zip(&self.rows) {
            for (k, r) in rows.iter().enumerate() {
                t.push(vec![g.resolution_exponent() as f64, k as f64, r.weak, r.lp[0], r.lp[1], r.lp[2], r.strong]);
            }
        }
        t
    }

    fn push_maximal(&self, r: &mut ExperimentReport) {
        let (mid, n, s) = (self.grids[1], self.trials, self.symbol.as_str());
        let maxima = self.maxima(|t| t.weak);
        let worst = maxima.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let least = maxima.iter().copied().fold(f64::INFINITY, f64::min);
        r.push(Measurement::record("weak_type", "max_ratio", maxima[1]).on(n, mid).symbol(s));
        r.push(Measurement::holds("weak_type", "finite", maxima.iter().all(|v| v.is_finite())).on(3 * n, mid).symbol(s));
        r.push(Measurement::holds("weak_type", "seed_reproducible", self.reproducible).on(1, mid).symbol(s));
        r.push(Measurement::below("weak_type", "refinement_drift", worst / least, DRIFT).on(3 * n, self.grids[2]).symbol(s));
        if self.symbol == "identity" {
            r.push(Measurement::at_most("weak_type", "identity_bound", worst, 1.0 + IDENTITY_TOLERANCE).on(3 * n, mid).symbol(s));
        }
        let strong = self.maxima(|t| t.strong)[1];
        r.push(Measurement::record("weak_type", "strong_l2_ratio", strong).on(n, mid).symbol(s));
        r.tables.push(self.table(s));
    }

    fn push_lp(&self, r: &mut ExperimentReport) {
        let (mid, n, s) = (self.grids[1], self.trials, self.symbol.as_str());
        for (k, p) in ["4_3", "2", "4"].iter().enumerate() {
            let maxima = self.maxima(|t| t.lp[k]);
            let worst = maxima.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let least = maxima.iter().copied().fold(f64::INFINITY, f64::min);
            r.push(Measurement::record("lp_bound", &format!("max_ratio_p{p}"), maxima[1]).on(n, mid).symbol(s));
            r.push(Measurement::below("lp_bound", &format!("refinement_drift_p{p}"), worst / least, DRIFT).on(3 * n, self.grids[2]).symbol(s));
            if self.symbol == "identity" {
                let dev = self.rows.iter().flatten().map(|t| (t.lp[k] - 1.0).abs()).fold(0.0, f64::max);
                r.push(Measurement::at_most("lp_bound", &format!("identity_deviation_p{p}"), dev, IDENTITY_TOLERANCE).on(3 * n, mid).symbol(s));
            }
        }
        r.tables.push(self.table(s));
    }
}

/// Symbols shipped for the configured dimension.
pub fn shipped_symbols(cfg: &ExperimentConfig) -> Result<Vec<&'static str>> {
    let grid = cfg.grid()?;
    Ok(Symbol::NAMES.into_iter().filter(|n| Symbol::by_name(n, &grid).is_ok()).collect())
}

pub fn maximal_report(runs: &[Headline]) -> ExperimentReport {
    let mut r = ExperimentReport::new("maximal");
    for h in runs {
        h.push_maximal(&mut r);
    }
    r
}

pub fn lp_report(runs: &[Headline]) -> ExperimentReport {
    let mut r = ExperimentReport::new("lp");
    for h in runs {
        h.push_lp(&mut r);
    }
    r
}

pub fn run_maximal(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    Ok(maximal_report(&[Headline::compute(cfg, cfg.symbol_name())?]))
}

pub fn run_lp(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    Ok(lp_report(&[Headline::compute(cfg, cfg.symbol_name())?]))
}

/// Both reports over every shipped symbol of the configured dimension.
pub fn run_all_symbols(cfg: &ExperimentConfig) -> Result<(ExperimentReport, ExperimentReport)> {
    let runs = shipped_symbols(cfg)?
        .into_iter()
        .map(|s| Headline::compute(cfg, s))
        .collect::<Result<Vec<_>>>()?;
    Ok((maximal_report(&runs), lp_report(&runs)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn single_mode_under_sign_gives_its_modulus() {
        let grid = GridSpec::new(1, 0, 6).unwrap();
        let f = Field::from_fn(grid, |x| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * 3.0 * x[0]));
        let g = modulated_maximal(&Symbol::Sign, &f, None).unwrap();
        assert!(g.values().iter().all(|v| (v.re - 1.0).abs() < 1e-12));
        // |{g > lambda}| = 1 for lambda < 1.
        assert!((weak_type_ratio(&g, &f) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weak_ratio_of_a_spike() {
        let grid = GridSpec::new(1, 0, 4).unwrap();
        let mut f = Field::zeros(grid);
        f.values_mut()[3] = Complex64::new(2.0, 0.0);
        // lambda^2 |{|f| > lambda}| -> 4 h, ||f||^2 = 4 h.
        assert!((weak_type_ratio(&f.abs(), &f) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lp_ratio_rejects_small_exponents() {
        let grid = GridSpec::new(1, 0, 4).unwrap();
        let f = Field::from_fn(grid, |_| Complex64::new(1.0, 0.0));
        assert!(lp_ratio(&f, &f, 1.0).is_err());
        assert!(lp_ratio(&f, &f, 0.5).is_err());
        assert_eq!(lp_ratio(&f, &f, 4.0).unwrap(), 1.0);
    }
}
