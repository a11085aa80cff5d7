//! Command-line front end for the obstacle control solver.

pub mod commands;
pub mod config;
pub mod verify;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{cmd_optimize, cmd_oracle, cmd_path, cmd_report, cmd_solve_state, CSV_COLUMNS};
pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "obstacle", version, about = "Coefficient control of a 2D obstacle problem")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration; defaults describe the reference instance.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "obstacle-out")]
    pub out: PathBuf,
    /// Overrides `[path] seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write two-column `.dat` files for plotting.
    #[arg(long, global = true)]
    pub emit_plot_data: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve the regularized state equation for the configured control.
    SolveState,
    /// Solve the unregularized obstacle problem by primal-dual active sets.
    Oracle,
    /// Optimize the control at the configured γ.
    Optimize,
    /// Run the γ continuation and write path.csv, slopes.json and snapshots.
    Path,
    /// Run the invariant battery and print one CHECK line per property.
    Verify,
    /// Summarize an existing path.csv.
    Report,
}

/// Failure classes, mapped to exit codes 1, 2 and 3.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Solver(anyhow::Error),
    Verify { failed: usize },
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Solver(_) => 2,
            Failure::Verify { .. } => 3,
        }
    }

    /// Input problems are configuration errors; everything else failed
    /// while solving.
    pub fn core(e: obstacle_core::Error) -> Self {
        use obstacle_core::Error as E;
        match e {
            E::InvalidArgument(_) | E::Validation(_) | E::Parse { .. } | E::DegenerateTriangle { .. } => {
                Failure::Config(e.into())
            }
            _ => Failure::Solver(e.into()),
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "configuration error: {e:#}"),
            Failure::Solver(e) => write!(f, "solver failure: {e:#}"),
            Failure::Verify { failed } => write!(f, "{failed} verification check(s) failed"),
        }
    }
}

pub fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(Failure::Config)?,
        None => RunConfig::parse("", ".").map_err(Failure::Config)?,
    };
    if let Some(seed) = cli.seed {
        cfg.path.seed = seed;
    }
    Ok(cfg)
}

/// Runs one subcommand; returns the text to print on success.
pub fn run(cli: &Cli) -> Result<String, Failure> {
    let cfg = load_config(cli)?;
    let pretty = |v: serde_json::Value| serde_json::to_string_pretty(&v).unwrap_or_default();
    match cli.command {
        Command::SolveState => cmd_solve_state(&cfg, &cli.out).map(pretty),
        Command::Oracle => cmd_oracle(&cfg, &cli.out).map(pretty),
        Command::Optimize => cmd_optimize(&cfg, &cli.out).map(pretty),
        Command::Path => cmd_path(&cfg, &cli.out, cli.emit_plot_data).map(pretty),
        Command::Report => cmd_report(&cfg, &cli.out, cli.emit_plot_data),
        Command::Verify => {
            let checks = verify::run_checks(&cfg)?;
            let failed = checks.iter().filter(|c| !c.pass).count();
            for c in &checks {
                println!("{c}");
            }
            if failed > 0 {
                Err(Failure::Verify { failed })
            } else {
                Ok(format!("all {} checks passed", checks.len()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use obstacle_core::Error;

    #[test]
    fn exit_codes_follow_failure_class() {
        assert_eq!(Failure::core(Error::Validation("x".into())).exit_code(), 1);
        assert_eq!(Failure::core(Error::InvalidArgument("x".into())).exit_code(), 1);
        assert_eq!(Failure::core(Error::Parse { line: 3, message: "x".into() }).exit_code(), 1);
        assert_eq!(Failure::core(Error::Newton { iterations: 50, history: vec![] }).exit_code(), 2);
        assert_eq!(Failure::core(Error::LinearSolver { iterations: 9, residual: 1.0 }).exit_code(), 2);
        assert_eq!(Failure::Verify { failed: 2 }.exit_code(), 3);
    }
}
