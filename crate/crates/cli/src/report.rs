use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use wavetile::GridSpec;

use crate::config::ExperimentConfig;
use crate::Result;

/// One measured quantity, optionally checked against bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    /// Name of the statement the number belongs to.
    pub anchor: String,
    pub name: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// Upper bound is strict.
    pub strict: bool,
    pub passed: bool,
    /// A failing hard measurement fails the run.
    pub hard: bool,
    pub trials: usize,
    pub grid: Option<GridSpec>,
    pub symbol: Option<String>,
}

impl Measurement {
    fn new(anchor: &str, name: &str, value: f64, lower: Option<f64>, upper: Option<f64>, strict: bool) -> Self {
        let passed = value.is_finite()
            && lower.is_none_or(|l| value >= l)
            && upper.is_none_or(|u| if strict { value < u } else { value <= u });
        Self {
            anchor: anchor.into(),
            name: name.into(),
            value,
            lower,
            upper,
            strict,
            passed,
            hard: true,
            trials: 0,
            grid: None,
            symbol: None,
        }
    }

    /// `value <= bound`.
    pub fn at_most(anchor: &str, name: &str, value: f64, bound: f64) -> Self {
        Self::new(anchor, name, value, None, Some(bound), false)
    }

    /// `value < bound`.
    pub fn below(anchor: &str, name: &str, value: f64, bound: f64) -> Self {
        Self::new(anchor, name, value, None, Some(bound), true)
    }

    pub fn at_least(anchor: &str, name: &str, value: f64, bound: f64) -> Self {
        Self::new(anchor, name, value, Some(bound), None, false)
    }

    pub fn within(anchor: &str, name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self::new(anchor, name, value, Some(lo), Some(hi), false)
    }

    /// A measured constant; passes when finite.
    pub fn record(anchor: &str, name: &str, value: f64) -> Self {
        Self::new(anchor, name, value, None, None, false)
    }

    /// A yes/no outcome stored as 1 or 0.
    pub fn holds(anchor: &str, name: &str, ok: bool) -> Self {
        Self::new(anchor, name, if ok { 1.0 } else { 0.0 }, Some(1.0), None, false)
    }

    pub fn soft(mut self) -> Self {
        self.hard = false;
        self
    }

    pub fn on(mut self, trials: usize, grid: GridSpec) -> Self {
        self.trials = trials;
        self.grid = Some(grid);
        self
    }

    pub fn symbol(mut self, name: &str) -> Self {
        self.symbol = Some(name.into());
        self
    }
}

/// Numeric rows written as one CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub id: String,
    pub passed: bool,
    pub measurements: Vec<Measurement>,
    pub tables: Vec<Table>,
}

impl ExperimentReport {
    pub fn new(id: &str) -> Self {
        Self { id: id.into(), passed: true, measurements: Vec::new(), tables: Vec::new() }
    }

    pub fn push(&mut self, m: Measurement) {
        if m.hard && !m.passed {
            self.passed = false;
        }
        self.measurements.push(m);
    }

    pub fn find(&self, name: &str) -> Option<&Measurement> {
        self.measurements.iter().find(|m| m.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Measurement> {
        self.measurements.iter().filter(|m| !m.passed)
    }
}

/// Everything written to `report.json`. Wall-clock data lives in
/// [`Timing`] so the report bytes depend only on the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: ExperimentConfig,
    pub passed: bool,
    /// Set when a hard failure stopped the suite early.
    pub aborted_after: Option<String>,
    pub experiments: Vec<ExperimentReport>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix_seconds: u64,
    pub experiments: Vec<(String, f64)>,
}

impl SuiteReport {
    pub fn write(&self, timing: &Timing, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        std::fs::write(dir.join("report.json"), json)?;
        std::fs::write(dir.join("timing.json"), serde_json::to_string_pretty(timing)? + "\n")?;
        for e in &self.experiments {
            for t in &e.tables {
                std::fs::write(dir.join(format!("{}_{}.csv", e.id, t.name)), t.to_csv())?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_and_nan() {
        assert!(Measurement::at_most("a", "x", 1.0, 1.0).passed);
        assert!(!Measurement::below("a", "x", 1.0, 1.0).passed);
        assert!(!Measurement::record("a", "x", f64::NAN).passed);
        assert!(!Measurement::within("a", "x", 0.21, 0.18, 0.2).passed);
        assert!(!Measurement::holds("a", "x", false).passed);
    }

    #[test]
    fn soft_failures_do_not_fail_the_experiment() {
        let mut r = ExperimentReport::new("e");
        r.push(Measurement::at_most("a", "x", 2.0, 1.0).soft());
        assert!(r.passed);
        r.push(Measurement::at_most("a", "y", 2.0, 1.0));
        assert!(!r.passed);
        assert_eq!(r.failures().count(), 2);
    }
}
