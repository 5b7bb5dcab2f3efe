use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use covlab::config::{load_config, Format, LedgerFlag};
use covlab::experiments::run_experiment;
use covlab::report::Report;
use covlab::suite;

#[derive(Parser)]
#[command(name = "covlab", version, about = "Covariant lattice field theory experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Report path; stdout when absent (overrides `output` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        ledger: Option<LedgerFlag>,
    },
    /// Run the acceptance matrix.
    Suite {
        #[arg(long, required = true)]
        all: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn emit(report: &Report, out: Option<&PathBuf>, format: Format) -> anyhow::Result<()> {
    match out {
        Some(path) => report.save(path, format),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            report.write(&mut lock, format)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn summarize(report: &Report) {
    for r in report.failures() {
        eprintln!("FAIL {} {} = {:e}", r.experiment, r.metric, r.value);
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run { config, out, format, seed, ledger } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(ledger) = ledger {
                cfg.ledger = ledger;
            }
            if let Some(format) = format {
                cfg.format = format;
            }
            if out.is_some() {
                cfg.output = out;
            }
            cfg.validate()?;
            let report = run_experiment(&cfg);
            emit(&report, cfg.output.as_ref(), cfg.format)?;
            summarize(&report);
            Ok(report.all_pass())
        }
        Command::Suite { all: _, out, format, seed } => {
            let configs = suite::suite_configs(seed);
            for cfg in &configs {
                cfg.validate()?;
            }
            let report = suite::run_all(&configs, suite::thread_limit()?)?;
            emit(&report, out.as_ref(), format)?;
            summarize(&report);
            Ok(report.all_pass())
        }
    }
}

/// 0 when every check passes, 1 when some check fails, 2 on configuration or I/O errors.
fn exit_code(outcome: &anyhow::Result<bool>) -> u8 {
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(_) => 2,
    }
}

fn main() -> ExitCode {
    let outcome = run(Cli::parse());
    if let Err(e) = &outcome {
        eprintln!("covlab: {e:#}");
    }
    ExitCode::from(exit_code(&outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use covlab::config::ConfigError;
    use std::path::Path;

    fn write_config(dir: &Path, body: &str) -> String {
        let path = dir.join("covlab.toml");
        std::fs::write(&path, body).unwrap();
        path.to_str().unwrap().to_string()
    }

    fn invoke(args: &[&str]) -> anyhow::Result<bool> {
        run(Cli::try_parse_from(std::iter::once("covlab").chain(args.iter().copied()))?)
    }

    #[test]
    fn passing_run_writes_csv() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), "theory = \"kg\"\nexperiment = \"omega-check\"\n");
        let out = dir.path().join("r.csv");
        let outcome = invoke(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(exit_code(&outcome), 0);
        let text = std::fs::read_to_string(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("experiment,metric,value,tolerance,pass,seconds"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!((row[0], row[1], row[4]), ("kg/omega-check", "omega_spread", "true"));
    }

    #[test]
    fn json_report_echoes_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), "theory = \"schrodinger\"\nexperiment = \"evolve\"\nn = 16\n");
        let out = dir.path().join("r.json");
        let outcome = invoke(&["run", "--config", &cfg, "--format", "json", "--out", out.to_str().unwrap(), "--seed", "7"]);
        assert_eq!(exit_code(&outcome), 0);
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
        assert_eq!(json["configs"][0]["seed"], 7);
        assert_eq!(json["configs"][0]["n"], 16);
        assert_eq!(json["configs"][0]["format"], "json");
        assert!(json["records"].as_array().unwrap().iter().any(|r| r["metric"] == "norm_drift" && r["pass"] == true));
    }

    #[test]
    fn printed_ledger_fails_with_one() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), "theory = \"kg\"\nexperiment = \"darboux-check\"\nn = 16\n");
        let out = dir.path().join("r.csv");
        for spelling in ["paper", "paper-printed"] {
            let outcome = invoke(&["run", "--config", &cfg, "--ledger", spelling, "--out", out.to_str().unwrap()]);
            assert_eq!(exit_code(&outcome), 1);
            let text = std::fs::read_to_string(&out).unwrap();
            assert!(text.lines().any(|l| l.starts_with("kg/darboux-check/paper-ledger,darboux_invariance,") && l.contains(",false,")));
        }
    }

    #[test]
    fn configuration_errors_map_to_two() {
        let dir = tempfile::tempdir().unwrap();
        let bad = write_config(dir.path(), "theory = \"kg\"\nexperiment = \"evolve\"\nn = 63\n");
        let outcome = invoke(&["run", "--config", &bad]);
        assert_eq!(exit_code(&outcome), 2);
        let err = outcome.unwrap_err();
        assert!(matches!(err.downcast_ref::<ConfigError>(), Some(ConfigError::Invalid { field: "n", .. })));

        let missing = dir.path().join("absent.toml");
        assert_eq!(exit_code(&invoke(&["run", "--config", missing.to_str().unwrap()])), 2);

        let good = write_config(dir.path(), "theory = \"kg\"\nexperiment = \"omega-check\"\nn = 16\n");
        let unwritable = dir.path().join("no-such-dir").join("r.csv");
        assert_eq!(exit_code(&invoke(&["run", "--config", &good, "--out", unwritable.to_str().unwrap()])), 2);
    }

    #[test]
    fn usage_errors() {
        assert!(Cli::try_parse_from(["covlab", "suite"]).is_err());
        assert!(Cli::try_parse_from(["covlab", "run"]).is_err());
        assert!(Cli::try_parse_from(["covlab", "run", "--config", "x.toml", "--format", "xml"]).is_err());
        assert!(Cli::try_parse_from(["covlab", "suite", "--all", "--seed", "7"]).is_ok());
    }
}
