use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use chain_reduction::cli::{
    cmd_analytic, cmd_simulate, cmd_verify, exit, exit_code, uniform_grid, ChainSource,
    ConfigFile, Manifest, OutputFormat, RunConfig,
};
use chain_reduction::ensemble::Execution;
use chain_reduction::Error;

#[derive(Parser)]
#[command(name = "chain-reduction", version, about = "Sequential-reduction decay-chain simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Unreduced component distribution and currents over a time grid.
    Analytic {
        #[command(flatten)]
        common: Common,
        /// Comma-separated, strictly increasing times.
        #[arg(long, value_delimiter = ',', conflicts_with = "points")]
        grid: Option<Vec<f64>>,
        /// Evenly spaced points on [0, --time] when no grid is given.
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Run a reduction ensemble and write the count histogram.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Compare the reduction ensemble, the jump oracle and the unreduced law.
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
            Format::Both => OutputFormat::Both,
        }
    }
}

#[derive(Args)]
struct Common {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replay a manifest; only --out and --threads still apply.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Number of atoms in the source.
    #[arg(long, conflicts_with = "rates")]
    atoms: Option<usize>,
    /// Per-atom decay constant.
    #[arg(long, conflicts_with = "rates")]
    k: Option<f64>,
    /// Explicit comma-separated transition rates.
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    /// Query time.
    #[arg(long)]
    time: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads (default: available parallelism).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, Error> {
        if let Some(path) = &self.manifest {
            let mut config = Manifest::load(path)?.config;
            if let Some(out) = &self.out {
                config.output_dir = out.clone();
            }
            return Ok(config);
        }
        let mut config = RunConfig::default();
        if let Some(path) = &self.config {
            config = ConfigFile::load(path)?.apply(config);
        }
        if let Some(rates) = &self.rates {
            config.chain_source = ChainSource::Rates {
                rates: rates.clone(),
            };
        } else if self.atoms.is_some() || self.k.is_some() {
            let (n0, k0) = match config.chain_source {
                ChainSource::Atoms { n_atoms, k } => (n_atoms, k),
                ChainSource::Rates { .. } => (2, 1.0),
            };
            config.chain_source = ChainSource::Atoms {
                n_atoms: self.atoms.unwrap_or(n0),
                k: self.k.unwrap_or(k0),
            };
        }
        if let Some(t) = self.time {
            config.query_time = t;
        }
        if let Some(n) = self.trials {
            config.trials = n;
        }
        if let Some(s) = self.seed {
            config.master_seed = s;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        if let Some(f) = self.format {
            config.format = f.into();
        }
        Ok(config)
    }

    fn execution(&self) -> Execution {
        Execution {
            threads: self.threads,
        }
    }
}

fn fail(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(exit_code(err))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Analytic {
            common,
            grid,
            points,
        } => {
            let config = match common.resolve() {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let grid = grid.unwrap_or_else(|| uniform_grid(config.query_time, points));
            match cmd_analytic(&config, &grid) {
                Ok(files) => {
                    files.iter().for_each(|f| println!("{}", f.display()));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Simulate { common } => {
            let result = common
                .resolve()
                .and_then(|config| cmd_simulate(&config, common.execution()));
            match result {
                Ok(files) => {
                    files.iter().for_each(|f| println!("{}", f.display()));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Verify { common } => {
            let result = common
                .resolve()
                .and_then(|config| cmd_verify(&config, common.execution()));
            match result {
                Ok(report) if report.passed => {
                    println!("verify: all checks passed");
                    ExitCode::from(exit::SUCCESS)
                }
                Ok(report) => {
                    for failure in &report.failures {
                        eprintln!("FAILED {failure}");
                    }
                    ExitCode::from(exit::STATISTICAL_FAILURE)
                }
                Err(e) => fail(&e),
            }
        }
    }
}
