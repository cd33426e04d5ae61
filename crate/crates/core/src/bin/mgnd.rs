//! `mgnd`: contraction numbers of Schwarz-smoothed V-cycles for Nédélec problems.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::error;

use nedelec_mg::experiment::{run_table, ExperimentConfig};
use nedelec_mg::MgError;

#[derive(Parser, Debug)]
#[command(name = "mgnd", version, about)]
struct Cli {
    /// Settings file with `key = value` lines; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// table1 | table2 | table3 | table4.
    #[arg(long)]
    preset: Option<String>,
    /// cube | fichera.
    #[arg(long)]
    domain: Option<String>,
    /// edge | vertex.
    #[arg(long)]
    smoother: Option<String>,
    #[arg(long)]
    max_level: Option<String>,
    /// List (1,2,5) or range (1..5).
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    alpha_black: Option<String>,
    #[arg(long)]
    beta_black: Option<String>,
    #[arg(long)]
    alpha_white: Option<String>,
    #[arg(long)]
    beta_white: Option<String>,
    /// Damping factor of the smoother.
    #[arg(long)]
    eta: Option<String>,
    /// Relative change of the power iteration regarded as converged.
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    max_iterations: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<String>,
    /// csv | markdown | json-lines.
    #[arg(long)]
    format: Option<String>,
    /// Worker threads (0: all cores).
    #[arg(long)]
    jobs: Option<String>,
    /// Wall-time budget per cell in seconds.
    #[arg(long)]
    cell_budget: Option<String>,
    /// Largest admissible number of unknowns on the finest level.
    #[arg(long)]
    max_dofs: Option<String>,
}

impl Cli {
    fn settings(&self) -> [(&'static str, &Option<String>); 18] {
        // preset first so that explicit flags override what it expands to
        [
            ("preset", &self.preset),
            ("domain", &self.domain),
            ("smoother", &self.smoother),
            ("max-level", &self.max_level),
            ("steps", &self.steps),
            ("alpha-black", &self.alpha_black),
            ("beta-black", &self.beta_black),
            ("alpha-white", &self.alpha_white),
            ("beta-white", &self.beta_white),
            ("eta", &self.eta),
            ("tol", &self.tol),
            ("max-iterations", &self.max_iterations),
            ("seed", &self.seed),
            ("output", &self.output),
            ("format", &self.format),
            ("jobs", &self.jobs),
            ("cell-budget", &self.cell_budget),
            ("max-dofs", &self.max_dofs),
        ]
    }

    fn experiment(&self) -> Result<ExperimentConfig, MgError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        for (key, value) in self.settings() {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let cfg = match cli.experiment() {
        Ok(cfg) => cfg,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(1);
        }
    };
    let report = match run_table(&cfg) {
        Ok(r) => r,
        Err(e @ (MgError::Config(_) | MgError::TooLarge { .. } | MgError::InvalidCoefficient(_))) => {
            error!("{e}");
            return ExitCode::from(1);
        }
        Err(e) => {
            error!("{e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = report.emit(cfg.format, cfg.output.as_deref()) {
        error!("cannot write report: {e}");
        return ExitCode::from(2);
    }
    if report.is_complete() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
