//! `qbsig`: run honest protocol worlds or named attacks and print a report.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qbsig_core::scenario::{self, list_scenarios, Format, ScenarioConfig, ScenarioError};

#[derive(Debug, Parser)]
#[command(
    name = "qbsig",
    version,
    about = "Blind signature simulator and attack runner"
)]
struct Cli {
    /// Print the scenario catalog and exit.
    #[arg(long)]
    list: bool,
    /// original | improved
    #[arg(long, default_value = "original")]
    scheme: String,
    /// honest, defense-suite, or an attack id (see --list)
    #[arg(long, default_value = "honest")]
    scenario: String,
    /// Message length in bits.
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Number of signatories.
    #[arg(long, default_value_t = 3)]
    t: usize,
    /// Decoy photons per channel check.
    #[arg(long, default_value_t = 16)]
    l: usize,
    /// Encoding basis amplitude; defaults to cos(pi/8).
    #[arg(long)]
    b: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// text | structured
    #[arg(long, default_value = "text")]
    format: String,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to every available core.
    #[arg(long)]
    workers: Option<usize>,
}

impl Cli {
    fn config(&self) -> Result<ScenarioConfig, ScenarioError> {
        let usage = ScenarioError::Usage;
        let defaults = ScenarioConfig::default();
        Ok(ScenarioConfig {
            scheme: self.scheme.parse().map_err(usage)?,
            scenario: self.scenario.parse()?,
            n: self.n,
            t: self.t,
            l: self.l,
            b: self.b.unwrap_or(defaults.b),
            trials: self.trials,
            seed: self.seed,
            format: self.format.parse::<Format>().map_err(usage)?,
            workers: self.workers,
        })
    }
}

fn catalog() -> String {
    list_scenarios()
        .iter()
        .map(|e| format!("{:<20} {:<9} {}\n", e.id, e.kind, e.description))
        .collect()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.list {
        print!("{}", catalog());
        return ExitCode::SUCCESS;
    }
    let result = cli.config().and_then(|c| scenario::run(&c).map(|r| (c, r)));
    let (config, report) = match result {
        Ok(v) => v,
        Err(e) => {
            eprintln!("qbsig: {e}");
            if let ScenarioError::Usage(_) = e {
                eprintln!("\nscenarios:\n{}", catalog());
            }
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let body = match config.format {
        Format::Text => report.to_text(),
        Format::Structured => report.to_json() + "\n",
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &body),
        None => std::io::stdout().write_all(body.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("qbsig: cannot write report: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(report.status.exit_code() as u8)
}
