//! Exit gate: one pass/fail line per acceptance criterion.
//!
//! Every tolerance is pinned here and compared against the raw measured
//! values, not against the `passed` flags of the experiment reports.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use wavetile::grid::pow2;
use wavetile::modelop::{operator_norm_estimate, selects};
use wavetile::wavepacket::{phi_hat, PacketBank};
use wavetile::{GridSpec, Tile};
use wavetile_cli::experiments::{self, headline, modelop};
use wavetile_cli::{ExperimentConfig, ExperimentReport};

struct Gate {
    failed: usize,
}

impl Gate {
    fn line(&mut self, n: usize, title: &str, pass: bool, detail: String) {
        if !pass {
            self.failed += 1;
        }
        let mark = if pass { "PASS" } else { "FAIL" };
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "criterion {n:>2} {mark} {title}: {detail}");
        let _ = out.flush();
    }
}

fn value(r: &ExperimentReport, name: &str) -> f64 {
    r.find(name).map_or(f64::NAN, |m| m.value)
}

/// Every measurement with this name.
fn values<'a>(r: &'a ExperimentReport, name: &'a str) -> impl Iterator<Item = (Option<&'a str>, f64)> + 'a {
    r.measurements.iter().filter(move |m| m.name == name).map(|m| (m.symbol.as_deref(), m.value))
}

fn holds(r: &ExperimentReport, name: &str) -> bool {
    let mut any = false;
    for (_, v) in values(r, name) {
        any = true;
        if v != 1.0 {
            return false;
        }
    }
    any
}

fn fmt(x: f64) -> String {
    format!("{x:.3e}")
}

/// `F phi_s(xi)` straight from its closed form.
fn packet_spectrum(tile: &Tile, grid: &GridSpec) -> Vec<Complex64> {
    let l = pow2(tile.scale());
    let c1 = tile.freq_child(1).center();
    let ci = tile.spatial().center();
    (0..grid.len())
        .map(|i| {
            let xi = grid.freq_value(grid.freq_point(i));
            let y = (xi[0] - c1[0]) / l;
            Complex64::from_polar(l.powf(-0.5) * phi_hat(&[y]), -2.0 * PI * ci[0] * (xi[0] - c1[0]))
        })
        .collect()
}

/// `||A_{xi,P}||` as the top eigenvalue of the Gram matrix, by Parseval.
fn gram_oracle(grid: &GridSpec, tiles: &[Tile]) -> f64 {
    let spectra: Vec<Vec<Complex64>> = tiles.iter().map(|t| packet_spectrum(t, grid)).collect();
    let k = spectra.len();
    let w = grid.freq_cell_volume();
    let g = DMatrix::from_fn(k, k, |i, j| {
        spectra[i].iter().zip(&spectra[j]).map(|(a, b)| a * b.conj()).sum::<Complex64>() * w
    });
    g.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max)
}

fn main() {
    let start = Instant::now();
    let cfg = ExperimentConfig::default();
    let mut gate = Gate { failed: 0 };

    // 1. Field identities on 1000 random fields, n = 1, q = 10.
    let t = Instant::now();
    let r = experiments::run_one(&cfg, "field").expect("field experiment");
    let secs = t.elapsed().as_secs_f64();
    let worst = ["plancherel", "fourier_roundtrip", "modulation_commutes", "translation_commutes"]
        .iter()
        .map(|n| value(&r, n))
        .fold(0.0, f64::max);
    let fields = r.find("plancherel").map_or(0, |m| m.trials);
    gate.line(
        1,
        "Plancherel and Fourier commutations",
        worst <= 1e-10 && fields >= 1000 && holds(&r, "weak_l2_below_l2") && secs < 30.0,
        format!("max error {} over {fields} fields in {secs:.1} s", fmt(worst)),
    );

    // 2. Wave packets.
    let r = experiments::run_one(&cfg, "wavepacket").expect("wavepacket experiment");
    let checks = [
        ("sandwich_violations", value(&r, "sandwich_violations") == 0.0),
        ("spectral_identity", value(&r, "spectral_identity") <= 1e-10),
        ("support_in_fifth_of_first_child", value(&r, "support_in_fifth_of_first_child") <= 1e-10),
        ("norm_spread", value(&r, "norm_spread") <= 1e-10),
    ];
    let failing: Vec<String> = checks
        .iter()
        .filter(|c| !c.1)
        .map(|c| format!("{} = {}", c.0, fmt(value(&r, c.0))))
        .collect();
    gate.line(
        2,
        "wave packets",
        failing.is_empty(),
        format!(
            "identity {}, norm spread {}, leak outside (2/5) first child {}; failing: [{}]",
            fmt(value(&r, "spectral_identity")),
            fmt(value(&r, "norm_spread")),
            fmt(value(&r, "support_in_two_fifths_of_first_child")),
            failing.join(", ")
        ),
    );

    // 3 and 4 share the model-operator run.
    let r = experiments::run_one(&cfg, "modelop").expect("modelop experiment");
    let spread = value(&r, "bessel_spread");
    let refined = value(&r, "bessel_refined_over_ceiling");
    let bessel_trials = r.find("bessel_spread").map_or(0, |m| m.trials) + value(&r, "empty_frame_operator") as usize;
    gate.line(
        3,
        "Bessel constants",
        spread < 1.5 && refined <= 1.1 && bessel_trials >= 100,
        format!("spread {spread:.4}, refined/ceiling {refined:.4} over {bessel_trials} (f, xi)"),
    );

    let grid = modelop::model_grid();
    let bank = PacketBank::new(grid);
    let (mut gap, mut lo, mut hi, mut pairs) = (0.0f64, f64::INFINITY, 0.0f64, 0);
    for t in 0..2 * cfg.trials as u64 {
        let (xi, tiles) = modelop::draw_pair(&cfg, t);
        let chosen: Vec<Tile> = tiles.tiles().iter().filter(|s| selects(s, xi, &grid)).copied().collect();
        if chosen.is_empty() {
            continue;
        }
        let dense = gram_oracle(&grid, &chosen);
        let est = operator_norm_estimate(&bank, xi, &tiles, 1, cfg.seed ^ t).expect("power iteration");
        gap = gap.max((dense - est).abs() / dense);
        lo = lo.min(dense);
        hi = hi.max(dense);
        pairs += 1;
    }
    gate.line(
        4,
        "model operator norms",
        gap <= 0.02 && hi / lo < 10.0 && pairs > 0,
        format!("power iteration within {:.2}% of the Gram oracle, spread {:.2} over {pairs} (xi, P)", 100.0 * gap, hi / lo),
    );

    // 5. Phase multipliers.
    let r = experiments::run_one(&cfg, "phase").expect("phase experiment");
    let m0 = value(&r, "m_at_origin");
    let mh = value(&r, "m_at_minus_half");
    let dil = value(&r, "dilation_invariance");
    let avg = value(&r, "final_error");
    let inf2 = value(&r, "annulus_infimum_n2");
    gate.line(
        5,
        "phase multipliers",
        m0 == 0.0
            && (0.18..=0.20).contains(&mh)
            && dil <= 1e-10
            && avg <= 1e-6
            && holds(&r, "error_decreases")
            && inf2 > 0.0,
        format!("m(-1/2) = {mh:.4}, dilation {}, averaging {}, inf m_64 = {inf2:.3}", fmt(dil), fmt(avg)),
    );

    // 6. Kernel decay.
    let r = experiments::run_one(&cfg, "kernel").expect("kernel experiment");
    let mut ok = true;
    let mut detail = Vec::new();
    for l in [2, 5] {
        for (sym, v) in values(&r, &format!("decay_spread_l{l}")) {
            let sym = sym.unwrap_or("?");
            ok &= if sym == "identity" { v < 0.01 } else { v < 10.0 };
            detail.push(format!("{sym} L={l}: {v:.4}"));
        }
    }
    for (sym, v) in values(&r, "summed_constant_drift") {
        ok &= v <= 0.05;
        detail.push(format!("{} summed drift {}", sym.unwrap_or("?"), fmt(v)));
    }
    gate.line(6, "kernel decay constants", ok, detail.join(", "));

    // 7. Cotlar comparisons.
    let r = experiments::run_one(&cfg, "cotlar").expect("cotlar experiment");
    let cancel = r.measurements.iter().filter(|m| m.anchor == "cotlar_cancellation").map(|m| m.value).fold(0.0, f64::max);
    let drifts: Vec<f64> = values(&r, "refinement_drift").map(|v| v.1).collect();
    let dmax = drifts.iter().copied().fold(0.0, f64::max);
    let dmin = drifts.iter().copied().fold(f64::INFINITY, f64::min);
    let trials = r.measurements.iter().filter(|m| m.name == "max_ratio").map(|m| m.trials).min().unwrap_or(0);
    let worst = values(&r, "max_ratio").map(|v| v.1).fold(0.0, f64::max);
    gate.line(
        7,
        "Cotlar comparisons",
        cancel <= 1e-10
            && holds(&r, "finite")
            && holds(&r, "seed_reproducible")
            && drifts.len() == 11
            && dmax < 2.0
            && dmin > 0.5
            && trials > 0
            && holds(&r, "constant_is_two_to_the_n"),
        format!(
            "cancellations {}, largest ratio {worst:.3}, drift {dmin:.3}..{dmax:.3}, min used trials {trials}",
            fmt(cancel)
        ),
    );

    // 8 and 9 share the tree run.
    let r = experiments::run_one(&cfg, "tree").expect("tree experiment");
    let scaled = value(&r, "max_scaled_count");
    gate.line(
        8,
        "density/size partitions",
        holds(&r, "light_part_bound")
            && holds(&r, "small_part_bound")
            && holds(&r, "ledger_bounds_and_partition")
            && holds(&r, "greedy_dominates_exact")
            && scaled.is_finite(),
        format!(
            "alpha {:.3}, beta {:.3}, max Count 4^j {scaled:.3} over 100 sets",
            value(&r, "alpha_hat"),
            value(&r, "beta_hat")
        ),
    );
    let (glo, ghi) = (value(&r, "gamma_drift_min"), value(&r, "gamma_drift_max"));
    let gamma = value(&r, "gamma_hat");
    gate.line(
        9,
        "tree estimate",
        holds(&r, "finite_and_nested")
            && gamma.is_finite()
            && glo > 0.5
            && ghi < 2.0
            && value(&r, "f1_aligned").is_finite()
            && value(&r, "j_measure").is_finite(),
        format!(
            "gamma {}, drift {glo:.3}..{ghi:.3}, F1 {:.3}/{:.3}, J-measure {}",
            fmt(gamma),
            value(&r, "f1_aligned"),
            value(&r, "f1_random"),
            fmt(value(&r, "j_measure"))
        ),
    );

    // 10. Maximal operator over every shipped symbol in both dimensions.
    let two = ExperimentConfig { dim: 2, grid_p: 1, grid_q: 4, ..ExperimentConfig::default() };
    let mut ok = true;
    let mut detail = Vec::new();
    for c in [&cfg, &two] {
        let (m, lp) = headline::run_all_symbols(c).expect("maximal experiment");
        for (sym, v) in values(&m, "max_ratio") {
            ok &= v.is_finite();
            detail.push(format!("n={} {}: {v:.3}", c.dim, sym.unwrap_or("?")));
        }
        ok &= holds(&m, "finite") && holds(&m, "seed_reproducible");
        for (_, v) in values(&m, "refinement_drift") {
            ok &= v < 2.0;
        }
        for (_, v) in values(&m, "identity_bound") {
            ok &= v <= 1.0 + 1e-10;
        }
        for p in ["4_3", "2", "4"] {
            for (_, v) in values(&lp, &format!("max_ratio_p{p}")) {
                ok &= v.is_finite();
            }
            for (_, v) in values(&lp, &format!("refinement_drift_p{p}")) {
                ok &= v < 2.0;
            }
        }
    }
    let total = start.elapsed().as_secs_f64();
    ok &= total < 900.0;
    gate.line(10, "modulated maximal operator", ok, format!("weak ratios [{}], total {total:.0} s", detail.join(", ")));

    if gate.failed > 0 {
        let _ = writeln!(std::io::stdout(), "{} of 10 criteria failed", gate.failed);
        std::process::exit(1);
    }
}
