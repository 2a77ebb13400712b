mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ebacktest::kernels::FunctionalKind;
use ebacktest::Error;

#[derive(Parser)]
#[command(name = "ebacktest", version, about = "E-value based standard and comparative backtests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario from a TOML config.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        out: OutArgs,
        /// Also write the generator state (needed for `opt` forecasts).
        #[arg(long)]
        state: bool,
    },
    /// Rolling AR(1)-GARCH(1,1) forecasts, one CSV per method.
    Forecast(commands::ForecastArgs),
    /// Standard backtest, or comparative when --standard is given.
    Backtest(commands::BacktestArgs),
    /// Comparative backtests over every ordered pair of a roster directory.
    Heatmap(commands::HeatmapArgs),
    /// Monte Carlo rejection rates of the standard (ES, VaR) backtest on iid data.
    RejectionRates(commands::RatesArgs),
    /// Recompute an eprocess.csv from its bets and payoffs.
    Replay {
        eprocess: PathBuf,
        /// Largest tolerated relative error in the final wealth.
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
}

#[derive(Args, Clone)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long = "out", env = "EBACKTEST_OUT_DIR", default_value = "out")]
    pub dir: PathBuf,
}

#[derive(Args, Clone)]
pub struct FunctionalArgs {
    #[arg(long)]
    pub functional: FunctionalKind,
    /// Level `p`; ignored for mean and mean-variance.
    #[arg(long, default_value_t = 0.5)]
    pub level: f64,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Unsupported(_) => 2,
        Error::Alignment(_) | Error::Domain(_) | Error::Io(_) => 3,
        Error::InvalidStep { .. } | Error::Fit(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out, state } => commands::simulate(&config, &out.dir, state),
        Command::Forecast(a) => commands::forecast(&a),
        Command::Backtest(a) => commands::backtest(&a),
        Command::Heatmap(a) => commands::heatmap(&a),
        Command::RejectionRates(a) => commands::rejection_rates(&a),
        Command::Replay { eprocess, tolerance } => commands::replay(&eprocess, tolerance),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
