//! Command-line surface. The binary stays thin: arguments map directly onto a
//! [`RunRequest`](crate::run::RunRequest) and all behavior lives in [`crate::run`].

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand as ClapSubcommand, ValueEnum};

use crate::emit::OutputFormat;
use crate::run::{RunRequest, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "nnlab",
    version,
    about = "Nearest-neighbor instability laboratory: closed-form bounds and \
             reproducible Monte Carlo estimates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, ClapSubcommand)]
pub enum Command {
    /// Evaluate every closed-form bound for one configuration.
    Bounds(RunArgs),
    /// Run the Monte Carlo estimators named in the configuration.
    Estimate(RunArgs),
    /// Estimate the volume fraction of stable queries.
    StableRegion(RunArgs),
    /// Run one estimator across every point of the configured sweep.
    Sweep(RunArgs),
    /// Validate estimates against their bounds; nonzero exit on violation.
    Check(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Path to the JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Directory receiving results, manifest, and the effective configuration.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Output format for the results table.
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    /// Overrides the seed in the configuration file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, env = "NNLAB_WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
    PlotData,
}

impl From<FormatArg> for OutputFormat {
    fn from(format: FormatArg) -> Self {
        match format {
            FormatArg::Csv => Self::Csv,
            FormatArg::Json => Self::Json,
            FormatArg::PlotData => Self::PlotData,
        }
    }
}

impl Cli {
    pub fn into_request(self) -> RunRequest {
        let (subcommand, args) = match self.command {
            Command::Bounds(args) => (Subcommand::Bounds, args),
            Command::Estimate(args) => (Subcommand::Estimate, args),
            Command::StableRegion(args) => (Subcommand::StableRegion, args),
            Command::Sweep(args) => (Subcommand::Sweep, args),
            Command::Check(args) => (Subcommand::Check, args),
        };
        RunRequest {
            subcommand,
            config_path: args.config,
            out_dir: args.out,
            format: args.format.into(),
            seed_override: args.seed,
            workers: args.workers,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arguments_parse_into_a_request() {
        let cli = Cli::try_parse_from([
            "nnlab",
            "sweep",
            "--config",
            "conf.json",
            "--out",
            "results",
            "--format",
            "plot-data",
            "--seed",
            "9",
            "--workers",
            "3",
        ])
        .unwrap();
        let request = cli.into_request();
        assert_eq!(request.subcommand, Subcommand::Sweep);
        assert_eq!(request.config_path, PathBuf::from("conf.json"));
        assert_eq!(request.out_dir, PathBuf::from("results"));
        assert_eq!(request.format, OutputFormat::PlotData);
        assert_eq!(request.seed_override, Some(9));
        assert_eq!(request.workers, Some(3));
    }

    #[test]
    fn defaults_fill_out_dir_and_format() {
        let cli = Cli::try_parse_from(["nnlab", "bounds", "--config", "c.json"]).unwrap();
        let request = cli.into_request();
        assert_eq!(request.out_dir, PathBuf::from("."));
        assert_eq!(request.format, OutputFormat::Csv);
        assert_eq!(request.seed_override, None);
    }
}
