//! Decay of the Littlewood-Paley kernel pieces.

use wavetile::symbol::{verify_kernel_decay, KernelDecayReport, Symbol};
use wavetile::GridSpec;

use crate::config::ExperimentConfig;
use crate::report::{ExperimentReport, Measurement, Table};
use crate::Result;

pub const POWERS: [u32; 2] = [2, 5];
pub const REACH: f64 = 64.0;
/// Scale-to-scale variation allowed for the identity symbol.
pub const IDENTITY_VARIATION: f64 = 0.01;
pub const SINGULAR_SPREAD: f64 = 10.0;
/// Relative change of the summed constant under refinement.
pub const SUMMED_DRIFT: f64 = 0.05;

pub fn decay(a: &Symbol, grid: &GridSpec) -> Result<KernelDecayReport> {
    Ok(verify_kernel_decay(a, grid, 0..=3, &POWERS, REACH)?)
}

pub fn run(_cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("kernel");
    let grid = GridSpec::new(1, 10, 5)?;
    let fine = GridSpec::new(1, 11, 6)?;
    let mut table = Table::new("constants", &["symbol", "power", "j", "constant"]);
    for (code, a) in [(0.0, Symbol::Identity { dim: 1 }), (1.0, Symbol::Sign)] {
        let rep = decay(&a, &grid)?;
        for fit in &rep.fits {
            for &(j, c) in &fit.constants {
                table.push(vec![code, fit.power as f64, j as f64, c]);
            }
            let name = format!("decay_spread_l{}", fit.power);
            let m = if code == 0.0 {
                Measurement::below("kernel_decay", &name, fit.spread - 1.0, IDENTITY_VARIATION)
            } else {
                Measurement::below("kernel_decay", &name, fit.spread, SINGULAR_SPREAD)
            };
            r.push(m.on(4, grid).symbol(a.name()));
        }
        let refined = decay(&a, &fine)?;
        r.push(Measurement::record("kernel_decay", "summed_constant", rep.summed_constant).on(1, grid).symbol(a.name()));
        let change = (refined.summed_constant / rep.summed_constant - 1.0).abs();
        r.push(Measurement::at_most("kernel_decay", "summed_constant_drift", change, SUMMED_DRIFT).on(1, fine).symbol(a.name()));
    }
    r.tables.push(table);
    Ok(r)
}
