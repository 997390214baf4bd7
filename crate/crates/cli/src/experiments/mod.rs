//! The experiment registry.
//!
//! Each experiment draws everything from the config seed and writes one
//! [`ExperimentReport`]. Trial counts scale with `config.trials`: the field
//! experiment uses ten times the count, the model-operator norm and Cotlar
//! experiments twice, the others once.

use std::time::Instant;

use rand::Rng;
use wavetile::grid::Lattice;
use wavetile::random::trial_rng;
use wavetile::GridSpec;

use crate::config::ExperimentConfig;
use crate::report::{ExperimentReport, SuiteReport, Timing};
use crate::Result;

pub mod cotlar;
pub mod field;
pub mod headline;
pub mod kernel;
pub mod modelop;
pub mod packets;
pub mod phase;
pub mod tree;

pub struct Experiment {
    pub id: &'static str,
    pub about: &'static str,
}

/// Registered experiments, in suite order.
pub const EXPERIMENTS: [Experiment; 10] = [
    Experiment { id: "field", about: "Plancherel and Fourier commutation identities" },
    Experiment { id: "wavepacket", about: "bump sandwich, packet spectra, supports and norms" },
    Experiment { id: "modelop", about: "model operator norms against a dense Gram oracle; Bessel constants" },
    Experiment { id: "phase", about: "phase multipliers, dilation invariance, averaging identity" },
    Experiment { id: "kernel", about: "Littlewood-Paley kernel decay constants" },
    Experiment { id: "cotlar", about: "Cotlar-type comparison constants and their refinement drift" },
    Experiment { id: "tree", about: "density/size partitions, level decomposition, tree estimate" },
    Experiment { id: "maximal", about: "weak-type ratio of the modulated maximal operator" },
    Experiment { id: "lp", about: "L^p ratios of the modulated maximal operator" },
    Experiment { id: "suite", about: "all of the above, stopping at the first hard failure" },
];

/// Runs one registered experiment other than `suite`.
pub fn run_one(cfg: &ExperimentConfig, id: &str) -> Result<ExperimentReport> {
    match id {
        "field" => field::run(cfg),
        "wavepacket" => packets::run(cfg),
        "modelop" => modelop::run(cfg),
        "phase" => phase::run(cfg),
        "kernel" => kernel::run(cfg),
        "cotlar" => cotlar::run(cfg),
        "tree" => tree::run(cfg),
        "maximal" => headline::run_maximal(cfg),
        "lp" => headline::run_lp(cfg),
        _ => Err(crate::CliError::Config(format!("unknown experiment {id:?}"))),
    }
}

/// Runs the configured experiment (or the whole suite).
pub fn run(cfg: &ExperimentConfig) -> Result<(SuiteReport, Timing)> {
    cfg.validate()?;
    let mut timing = Timing {
        started_unix_seconds: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        experiments: Vec::new(),
    };
    let mut report =
        SuiteReport { config: cfg.clone(), passed: true, aborted_after: None, experiments: Vec::new() };
    if cfg.experiment != "suite" {
        let t0 = Instant::now();
        let r = run_one(cfg, &cfg.experiment)?;
        timing.experiments.push((r.id.clone(), t0.elapsed().as_secs_f64()));
        report.passed = r.passed;
        report.experiments.push(r);
        return Ok((report, timing));
    }
    let ids = ["field", "wavepacket", "modelop", "phase", "kernel", "cotlar", "tree"];
    for id in ids {
        let t0 = Instant::now();
        let r = run_one(cfg, id)?;
        timing.experiments.push((id.into(), t0.elapsed().as_secs_f64()));
        let ok = r.passed;
        report.experiments.push(r);
        if !ok {
            report.passed = false;
            report.aborted_after = Some(id.into());
            return Ok((report, timing));
        }
    }
    // The maximal and L^p reports share one computation of g per symbol.
    let t0 = Instant::now();
    let (max_r, lp_r) = headline::run_all_symbols(cfg)?;
    let dt = t0.elapsed().as_secs_f64();
    timing.experiments.push(("maximal+lp".into(), dt));
    report.passed = max_r.passed && lp_r.passed;
    if !max_r.passed {
        report.aborted_after = Some("maximal".into());
    } else if !lp_r.passed {
        report.aborted_after = Some("lp".into());
    }
    report.experiments.push(max_r);
    report.experiments.push(lp_r);
    Ok((report, timing))
}

/// A uniformly random in-band frequency integer.
pub(crate) fn random_frequency(rng: &mut impl Rng, grid: &GridSpec) -> Lattice {
    let half = grid.samples_per_axis() as i64 / 2;
    let mut k = [0i64; 2];
    for v in k.iter_mut().take(grid.dim()) {
        *v = rng.random_range(-half..half);
    }
    k
}

/// Seeded generator for one trial of one experiment.
pub(crate) fn rng_for(cfg: &ExperimentConfig, tag: u64, trial: u64) -> impl Rng {
    trial_rng(cfg.seed ^ tag, trial)
}
