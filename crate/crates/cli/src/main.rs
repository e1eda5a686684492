use clap::{Parser, Subcommand};
use fairlens_cli::config::{ExperimentConfig, Overrides};
use fairlens_cli::{commands, exit_code};
use std::path::PathBuf;

/// Train fairness-regularized tabular classifiers and audit them with
/// result- and explanation-fairness metrics.
#[derive(Parser)]
#[command(name = "fairlens", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker pool size for grid cells.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Replace the config's seed list (comma separated).
    #[arg(long, value_delimiter = ',')]
    seed_override: Option<Vec<u64>>,
    /// Force one distance function (sw, cosine, kl, mse).
    #[arg(long)]
    distance: Option<String>,
}

impl CommonArgs {
    fn load(&self) -> fairlens::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        let overrides = Overrides {
            out: self.out.clone(),
            parallel: None,
            seed_override: self.seed_override.clone(),
            distance: self.distance.clone(),
        };
        overrides.apply(&mut cfg)?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a single configuration (singleton grid), one run per seed.
    Train(CommonArgs),
    /// Run the full grid x seed matrix and write summary.csv.
    Grid(CommonArgs),
    /// Extract the Pareto frontier from a summary.csv.
    Pareto {
        /// Summary file produced by the grid command.
        #[arg(long)]
        summary: PathBuf,
        /// Output directory (default: the summary's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the regularization coefficient.
    LambdaSweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Lambda values (comma separated).
        #[arg(long, value_delimiter = ',', default_value = "0,0.001,0.01,0.1,1,10")]
        lambdas: Vec<f64>,
    },
}

fn run(cli: Cli) -> fairlens::Result<()> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.load()?;
            commands::cmd_train(&cfg, args.parallel)
        }
        Command::Grid(args) => {
            let cfg = args.load()?;
            commands::cmd_grid(&cfg, args.parallel).map(|_| ())
        }
        Command::Pareto { summary, out } => {
            let out_dir = out.unwrap_or_else(|| {
                summary
                    .parent()
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("."))
            });
            commands::cmd_pareto(&summary, &out_dir)
        }
        Command::LambdaSweep { common, lambdas } => {
            let cfg = common.load()?;
            commands::cmd_lambda_sweep(&cfg, &lambdas, common.parallel).map(|_| ())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
