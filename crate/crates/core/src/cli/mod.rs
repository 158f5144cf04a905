//! Command-line front end: run scenarios, list presets, run verification
//! suites and export plot data.

pub mod export;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::dynamics::Tolerances;
use crate::error::{Error, Result};
use crate::scenario::{self, Outcome, Scenario};
use crate::verify::{self, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECKS_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "billiards", version, about = "Integrable Lagrange billiards on the plane, sphere and hyperbolic plane")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario file (one scenario or an array) or a preset.
    Run {
        /// JSON scenario file.
        config: Option<PathBuf>,
        /// Run a shipped preset instead of a file.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// Output directory; each scenario writes into a subdirectory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// List shipped presets, or print one as JSON.
    Presets {
        #[arg(long)]
        dump: Option<String>,
    },
    /// Run a verification suite.
    Verify {
        suite: SuiteArg,
        #[arg(long, default_value_t = verify::DEFAULT_SEED)]
        seed: u64,
        /// Also write the results as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run a scenario and write plot data without evaluating exit status.
    Export {
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SuiteArg {
    Projective,
    Conformal,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Projective => Suite::Projective,
            SuiteArg::Conformal => Suite::Conformal,
            SuiteArg::All => Suite::All,
        }
    }
}

/// Parse a scenario file holding one scenario or an array of them.
pub fn load_scenarios(path: &Path) -> Result<Vec<Scenario>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenarios(&text)
}

pub fn parse_scenarios(text: &str) -> Result<Vec<Scenario>> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let list = match value {
        serde_json::Value::Array(items) => items,
        other => vec![other],
    };
    let scenarios = list
        .into_iter()
        .map(|v| serde_json::from_value::<Scenario>(v).map_err(|e| Error::Config(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    for s in &scenarios {
        s.validate().map_err(|e| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(format!("{}: {other}", s.name)),
        })?;
    }
    Ok(scenarios)
}

fn select(config: Option<PathBuf>, preset: Option<String>) -> Result<Vec<Scenario>> {
    match (config, preset) {
        (Some(path), None) => load_scenarios(&path),
        (None, Some(name)) => scenario::preset(&name)
            .map(|s| vec![s])
            .ok_or_else(|| Error::Config(format!("unknown preset '{name}'"))),
        _ => Err(Error::Config("give a config file or --preset".into())),
    }
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Io { .. } => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

/// Run scenarios in parallel and write their artifacts; results keep input
/// order.
pub fn run_batch(scenarios: &[Scenario], out: &Path, tol: &Tolerances) -> Vec<Result<Outcome>> {
    scenarios
        .par_iter()
        .map(|s| {
            let outcome = scenario::run_scenario(s, tol)?;
            export::write_outcome(&outcome, &out.join(&s.name))?;
            Ok(outcome)
        })
        .collect()
}

fn run_command(config: Option<PathBuf>, preset: Option<String>, out: &Path, judge: bool) -> i32 {
    let scenarios = match select(config, preset) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    let tol = Tolerances::from_env();
    let mut code = EXIT_OK;
    for (s, result) in scenarios.iter().zip(run_batch(&scenarios, out, &tol)) {
        match result {
            Ok(o) => {
                println!("{}: {}", s.name, if o.report.all_ok { "ok" } else { "checks failed" });
                for c in &o.report.checks {
                    println!("  {}", c.line());
                }
                if judge && !o.report.all_ok && code == EXIT_OK {
                    code = EXIT_CHECKS_FAILED;
                }
            }
            Err(e) => {
                eprintln!("{}: error: {e}", s.name);
                code = code.max(exit_code_for(&e));
            }
        }
    }
    code
}

/// Execute a parsed command line and return the process exit code.
pub fn execute(cli: Cli) -> i32 {
    match cli.command {
        Command::Run { config, preset, out } => run_command(config, preset, &out, true),
        Command::Export { config, preset, out } => run_command(config, preset, &out, false),
        Command::Presets { dump: None } => {
            for s in scenario::presets() {
                println!("{:<36} {}", s.name, s.description);
            }
            EXIT_OK
        }
        Command::Presets { dump: Some(name) } => match scenario::preset(&name) {
            Some(s) => {
                println!("{}", serde_json::to_string_pretty(&s).expect("scenarios serialize"));
                EXIT_OK
            }
            None => {
                eprintln!("error: unknown preset '{name}'");
                EXIT_CONFIG
            }
        },
        Command::Verify { suite, seed, json } => {
            let results = verify::run_suite(suite.into(), seed, &Tolerances::from_env());
            for c in &results {
                println!("{}", c.line());
            }
            if let Some(path) = json {
                let text = serde_json::to_string_pretty(&results).expect("criteria serialize");
                if let Err(e) = std::fs::write(&path, text) {
                    let e = Error::io(&path, e);
                    eprintln!("error: {e}");
                    return EXIT_CONFIG;
                }
            }
            if results.iter().all(verify::Criterion::passed) {
                EXIT_OK
            } else {
                EXIT_CHECKS_FAILED
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn malformed_config_is_a_config_error() {
        assert!(matches!(parse_scenarios("{not json"), Err(Error::Config(_))));
        assert!(matches!(parse_scenarios(r#"{"name": "x", "type": "billiard"}"#), Err(Error::Config(_))));
    }

    #[test]
    fn single_and_batch_configs_parse() {
        let one = serde_json::to_string(&scenario::preset("birkhoff-ellipse").unwrap()).unwrap();
        assert_eq!(parse_scenarios(&one).unwrap().len(), 1);
        assert_eq!(parse_scenarios(&format!("[{one},{one}]")).unwrap().len(), 2);
    }

    #[test]
    fn cli_arguments_parse() {
        Cli::try_parse_from(["billiards", "verify", "conformal", "--seed", "3"]).unwrap();
        Cli::try_parse_from(["billiards", "run", "--preset", "birkhoff-ellipse"]).unwrap();
        assert!(Cli::try_parse_from(["billiards", "verify", "nonsense"]).is_err());
    }
}
