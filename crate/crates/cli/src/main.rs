use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use wavetile::symbol::Symbol;
use wavetile_cli::experiments::{self, EXPERIMENTS};
use wavetile_cli::ExperimentConfig;

/// Runs the wavetile verification experiments.
#[derive(Debug, Parser)]
#[command(name = "wavetile", version)]
struct Args {
    /// JSON config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    grid_p: Option<i32>,
    #[arg(long)]
    grid_q: Option<i32>,
    #[arg(long)]
    symbol: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory for report.json, timing.json and the CSV tables.
    #[arg(long, default_value = "wavetile-out")]
    out: PathBuf,
    /// List experiments and symbols, then exit.
    #[arg(long)]
    list: bool,
}

fn listing() -> String {
    let mut s = String::from("experiments:\n");
    for e in EXPERIMENTS {
        s += &format!("  {:<11} {}\n", e.id, e.about);
    }
    s += "symbols:\n";
    for name in Symbol::NAMES {
        let dims = match name {
            "sign" => "n = 1",
            "riesz" => "n = 2",
            _ => "n = 1, 2",
        };
        s += &format!("  {name:<11} {dims}\n");
    }
    s
}

fn config(args: &Args) -> wavetile_cli::Result<ExperimentConfig> {
    let mut c = match &args.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &args.experiment {
        c.experiment = v.clone();
    }
    if let Some(v) = args.seed {
        c.seed = v;
    }
    if let Some(v) = args.dim {
        c.dim = v;
    }
    if let Some(v) = args.grid_p {
        c.grid_p = v;
    }
    if let Some(v) = args.grid_q {
        c.grid_q = v;
    }
    if let Some(v) = &args.symbol {
        c.symbol = Some(v.clone());
    }
    if let Some(v) = args.trials {
        c.trials = v;
    }
    Ok(c)
}

/// 0 when every hard check passed, 1 on a failed check, 2 on errors.
fn run_cli(args: &Args) -> u8 {
    if args.list {
        print!("{}", listing());
        return 0;
    }
    let run = config(args).and_then(|c| experiments::run(&c));
    let (report, timing) = match run {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    if let Err(e) = report.write(&timing, &args.out) {
        eprintln!("error: {e}");
        return 2;
    }
    for e in &report.experiments {
        println!("{:<11} {}", e.id, if e.passed { "pass" } else { "FAIL" });
        for m in e.failures() {
            let kind = if m.hard { "hard" } else { "soft" };
            println!("  {kind} failure {}/{}: {:e}", m.anchor, m.name, m.value);
        }
    }
    if let Some(id) = &report.aborted_after {
        println!("stopped after {id}");
    }
    if report.passed {
        0
    } else {
        1
    }
}

fn main() -> ExitCode {
    ExitCode::from(run_cli(&Args::parse()))
}

#[cfg(test)]
mod tests {
    use std::path::Path;

    use super::*;

    fn run(args: &[&str]) -> u8 {
        let mut all = vec!["wavetile"];
        all.extend_from_slice(args);
        run_cli(&Args::try_parse_from(all).expect("valid flags"))
    }

    fn report(dir: &Path) -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
    }

    #[test]
    fn list_names_experiments_and_symbols() {
        let text = listing();
        for id in ["field", "cotlar", "maximal", "suite", "riesz", "modulated"] {
            assert!(text.contains(id), "{id} missing from\n{text}");
        }
        assert_eq!(run(&["--list"]), 0);
    }

    #[test]
    fn zero_trials_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run(&["--trials", "0", "--out", dir.path().to_str().unwrap()]), 2);
        assert!(!dir.path().join("report.json").exists());
    }

    #[test]
    fn bad_symbol_experiment_or_grid_is_an_error() {
        assert_eq!(run(&["--symbol", "riesz"]), 2);
        assert_eq!(run(&["--experiment", "nothing"]), 2);
        assert_eq!(run(&["--experiment", "maximal", "--dim", "2"]), 2);
        assert!(Args::try_parse_from(["wavetile", "--trials", "many"]).is_err());
    }

    #[test]
    fn report_bytes_are_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for d in [&a, &b] {
            assert_eq!(run(&["--experiment", "field", "--trials", "2", "--out", d.path().to_str().unwrap()]), 0);
        }
        let read = |d: &tempfile::TempDir, f: &str| std::fs::read(d.path().join(f)).unwrap();
        assert_eq!(read(&a, "report.json"), read(&b, "report.json"));
        assert_eq!(read(&a, "field_errors.csv"), read(&b, "field_errors.csv"));
        assert!(a.path().join("timing.json").exists());
        let csv = String::from_utf8(read(&a, "field_errors.csv")).unwrap();
        assert_eq!(csv.lines().count(), 21);
    }

    #[test]
    fn flags_override_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.json");
        std::fs::write(&cfg, r#"{"experiment": "phase", "trials": 2, "seed": 9}"#).unwrap();
        let out = dir.path().join("out");
        assert_eq!(run(&["--config", cfg.to_str().unwrap(), "--trials", "3", "--out", out.to_str().unwrap()]), 0);
        let r = report(&out);
        assert_eq!(r["config"]["trials"], 3);
        assert_eq!(r["config"]["seed"], 9);
        assert_eq!(r["experiments"][0]["id"], "phase");
        assert_eq!(r["passed"], true);
    }

    #[test]
    fn small_maximal_run_reports_anchored_constants() {
        let dir = tempfile::tempdir().unwrap();
        let code = run(&[
            "--experiment", "maximal", "--symbol", "identity", "--grid-q", "6", "--trials", "3",
            "--out", dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let r = report(dir.path());
        let ms = r["experiments"][0]["measurements"].as_array().unwrap();
        let bound = ms.iter().find(|m| m["name"] == "identity_bound").unwrap();
        assert_eq!(bound["anchor"], "weak_type");
        assert!(bound["value"].as_f64().unwrap() <= 1.0 + 1e-10);
        assert!(dir.path().join("maximal_identity.csv").exists());
    }
}
