mod commands;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use blendmatch::datagen::Mechanism;
use blendmatch::distance::BlendFamily;
use blendmatch::imputer::PoolingMode;
use clap::{Args, Parser, Subcommand};

/// Seed used by every command when neither `--seed` nor a config file sets
/// one. The studies keep their own documented defaults.
pub const DEFAULT_SEED: u64 = 20220401;

#[derive(Parser, Debug)]
#[command(
    name = "blendmatch",
    version,
    about = "Donor matching and multiple imputation with predictive, Mahalanobis and blended distances"
)]
pub struct Cli {
    /// Random seed. Defaults: study1 20220401, study2 20220402, others 20220401.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker thread cap. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Tab-separated output without decoration.
    #[arg(long, global = true)]
    pub quiet: bool,

    /// `key = value` file supplying defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

fn parse_unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("blend factor must lie in [0, 1], got {v}"))
    }
}

fn parse_proportion(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!(
            "proportion must lie strictly between 0 and 1, got {v}"
        ))
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct MethodArgs {
    /// Distance family: pmm, ranked or scaled.
    #[arg(long)]
    pub family: Option<BlendFamily>,

    /// Blend factor p, the weight on the predictive distance.
    #[arg(long, value_parser = parse_unit)]
    pub blend: Option<f64>,

    /// Number of donors (default 5).
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct DataArgs {
    /// Missingness mechanism: mcar or mar.
    #[arg(long)]
    pub mechanism: Option<Mechanism>,

    #[arg(long, value_parser = parse_proportion)]
    pub proportion: Option<f64>,

    /// Off-diagonal predictor correlation.
    #[arg(long)]
    pub rho: Option<f64>,

    /// Skewed predictors; `--skewed` alone means true.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub skewed: Option<bool>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the best donors for one row of a CSV file.
    Match {
        /// CSV with columns x1,x2,x3,y (empty y = missing).
        #[arg(long)]
        input: PathBuf,
        /// Row to match (0-based); its outcome is treated as missing.
        #[arg(long)]
        target_row: Option<usize>,
        #[command(flatten)]
        method: MethodArgs,
        /// Also write the full `index,pd,md` table here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multiply impute the missing outcomes of a CSV file.
    Impute {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        method: MethodArgs,
        /// Number of imputations (default 5).
        #[arg(long)]
        m: Option<usize>,
        /// Imputation CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic incomplete dataset.
    Generate {
        /// Rows (default 500).
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        data: DataArgs,
        /// Keep the true outcome in the `y` column of masked rows.
        #[arg(long)]
        with_truth: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Study I: the condition × method grid.
    Study1 {
        /// Replicates per condition (default 1000).
        #[arg(long)]
        nsim: Option<usize>,
        /// Imputations per replicate (default 5).
        #[arg(long)]
        m: Option<usize>,
        /// Interval pooling: finite or rubin.
        #[arg(long)]
        pooling: Option<PoolingMode>,
        /// Restrict the grid to these values.
        #[command(flatten)]
        data: DataArgs,
        /// Restrict the methods to this family and/or blend factor.
        #[command(flatten)]
        method: MethodArgs,
        /// Output directory (default study1_out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Study II: single-value imputation over blend factors 1.0 … 0.0.
    Study2 {
        /// Replicates (default 10000).
        #[arg(long)]
        nsim: Option<usize>,
        /// Imputations per replicate (default 50).
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        skewed: Option<bool>,
        /// Draw one sample and vary only the masked case.
        #[arg(long)]
        fixed_sample: bool,
        /// Output directory (default study2_out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Donor scatter for one synthetic target among 199 donors.
    #[command(name = "demo-figure1")]
    DemoFigure1 {
        #[command(flatten)]
        method: MethodArgs,
        /// Output directory (default figure1_out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.quiet {
        "error"
    } else {
        "warn"
    }))
    .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
