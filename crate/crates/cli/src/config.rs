use std::path::Path;

use serde::{Deserialize, Serialize};
use wavetile::symbol::Symbol;
use wavetile::GridSpec;

use crate::experiments::EXPERIMENTS;
use crate::{CliError, Result};

/// Largest grid the maximal-function experiments accept (finest grid of the
/// refinement triple).
pub const MAXIMAL_SAMPLE_CAP: usize = 1 << 16;

/// One run of the tool. Keys of a JSON config file match the field names;
/// missing keys take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    pub dim: usize,
    pub grid_p: i32,
    pub grid_q: i32,
    /// Defaults to `sign` for n = 1 and `riesz` for n = 2.
    pub symbol: Option<String>,
    pub trials: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: "suite".into(),
            seed: 1,
            dim: 1,
            grid_p: 0,
            grid_q: 10,
            symbol: None,
            trials: 100,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn grid(&self) -> Result<GridSpec> {
        Ok(GridSpec::new(self.dim, self.grid_p, self.grid_q)?)
    }

    pub fn symbol_name(&self) -> &str {
        match &self.symbol {
            Some(s) => s,
            None if self.dim == 2 => "riesz",
            None => "sign",
        }
    }

    pub fn symbol(&self) -> Result<Symbol> {
        Ok(Symbol::by_name(self.symbol_name(), &self.grid()?)?)
    }

    /// The grids `q - 1, q, q + 1` of the refinement study.
    pub fn refinement_triple(&self) -> Result<[GridSpec; 3]> {
        let g = |q| GridSpec::new(self.dim, self.grid_p, q).map_err(CliError::from);
        Ok([g(self.grid_q - 1)?, g(self.grid_q)?, g(self.grid_q + 1)?])
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(CliError::Config("trial count must be at least 1".into()));
        }
        if !EXPERIMENTS.iter().any(|e| e.id == self.experiment) {
            return Err(CliError::Config(format!(
                "unknown experiment {:?} (see --list)",
                self.experiment
            )));
        }
        self.symbol()?;
        if matches!(self.experiment.as_str(), "maximal" | "lp" | "suite") {
            let fine = self.refinement_triple()?[2];
            if fine.len() > MAXIMAL_SAMPLE_CAP {
                return Err(CliError::Config(format!(
                    "grid n={} p={} q={} has {} samples after refinement; the maximal \
                     experiments accept at most {MAXIMAL_SAMPLE_CAP}",
                    self.dim,
                    self.grid_p,
                    self.grid_q + 1,
                    fine.len()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(c.symbol_name(), "sign");
        assert_eq!(c.grid().unwrap(), GridSpec::new(1, 0, 10).unwrap());
    }

    #[test]
    fn partial_json_keeps_defaults() {
        let c: ExperimentConfig = serde_json::from_str(r#"{"seed": 7, "dim": 2}"#).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.trials, 100);
        assert_eq!(c.symbol_name(), "riesz");
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"sede": 7}"#).is_err());
    }

    #[test]
    fn rejects_bad_runs() {
        let bad = [
            ExperimentConfig { trials: 0, ..Default::default() },
            ExperimentConfig { experiment: "nope".into(), ..Default::default() },
            ExperimentConfig { symbol: Some("riesz".into()), ..Default::default() },
            ExperimentConfig { dim: 2, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
