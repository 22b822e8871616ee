use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tvfactor::factors::FactorModel;
use tvfactor::ingest::{DatasetId, Region};
use tvfactor::timeseries::MonthStamp;
use tvfactor::{Execution, Result};
use tvfactor_cli::config::{Gamma0Policy, ResidualSource, RunConfig};
use tvfactor_cli::pipeline::{self, Manifest, MANIFEST_FILE};

#[derive(Parser)]
#[command(
    name = "tvfactor",
    version,
    about = "Time-varying factor loadings for the 25 size/book-to-market portfolios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Download (or reuse cached) data files.
    Fetch {
        #[command(flatten)]
        common: Common,
        /// A single dataset id such as `us-factors3`; defaults to every file the model needs.
        #[arg(long)]
        dataset: Option<DatasetId>,
    },
    /// Summary statistics and unit-root tests for the factors.
    Describe {
        #[command(flatten)]
        common: Common,
        /// Largest ADF lag considered (default: Schwert rule).
        #[arg(long)]
        max_lag: Option<usize>,
    },
    /// Estimate coefficient paths with bootstrap bands.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        est: EstimateArgs,
        /// Re-run from a previous manifest, with its pinned data vintages.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Split estimates into one CSV per portfolio and coefficient.
    Plotdata {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Portfolio label such as `ME1BM5`, or `all`.
        #[arg(long, default_value = "all")]
        portfolio: String,
        /// Coefficient name such as `beta_HML`, or `all`.
        #[arg(long, default_value = "all")]
        coefficient: String,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value = "ff3")]
    model: FactorModel,
    #[arg(long, default_value = "us")]
    region: Region,
    /// First month, YYYY-MM.
    #[arg(long)]
    start: Option<MonthStamp>,
    /// Last month, YYYY-MM.
    #[arg(long)]
    end: Option<MonthStamp>,
    #[arg(long, default_value = "data/cache")]
    cache_dir: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Never touch the network; fail if a file is not cached.
    #[arg(long)]
    offline: bool,
    /// Run single-threaded.
    #[arg(long)]
    serial: bool,
}

#[derive(Args)]
struct EstimateArgs {
    /// Fixed smoothness ratio; chosen by maximum likelihood if omitted.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 500)]
    n_boot: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write estimates.json.
    #[arg(long)]
    json: bool,
    #[arg(long, value_enum, default_value_t = Gamma0Arg::StaticOls)]
    gamma0: Gamma0Arg,
    #[arg(long, value_enum, default_value_t = ResidArg::Static)]
    residuals: ResidArg,
    /// Resample each portfolio's residuals independently instead of whole rows.
    #[arg(long)]
    independent_resampling: bool,
    /// Weight portfolios by inverse static residual variance.
    #[arg(long)]
    rescale: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Gamma0Arg {
    StaticOls,
    Zero,
}

#[derive(Clone, Copy, ValueEnum)]
enum ResidArg {
    Static,
    TimeVarying,
}

impl Common {
    fn config(&self) -> RunConfig {
        let mut c = RunConfig::new(self.model, self.region);
        c.start = self.start;
        c.end = self.end;
        c.cache_dir = self.cache_dir.clone();
        c.out_dir = self.out.clone();
        c.offline = self.offline;
        c.exec = if self.serial {
            Execution::Serial
        } else {
            Execution::Parallel
        };
        c
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fetch { common, dataset } => {
            print!("{}", pipeline::cmd_fetch(&common.config(), dataset)?);
        }
        Command::Describe { common, max_lag } => {
            let mut c = common.config();
            c.max_lag = max_lag;
            print!("{}", pipeline::cmd_describe(&c)?);
        }
        Command::Estimate {
            common,
            est,
            replay,
        } => {
            let c = match replay {
                Some(path) => {
                    let mut c = Manifest::read(&path)?
                        .to_config(common.cache_dir.clone(), common.out.clone())?;
                    c.exec = common.config().exec;
                    c
                }
                None => {
                    let mut c = common.config();
                    c.lambda = est.lambda;
                    c.n_boot = est.n_boot;
                    c.level = est.level;
                    c.seed = est.seed;
                    c.json = est.json;
                    c.gamma0 = match est.gamma0 {
                        Gamma0Arg::StaticOls => Gamma0Policy::StaticOls,
                        Gamma0Arg::Zero => Gamma0Policy::Zero,
                    };
                    c.residuals = match est.residuals {
                        ResidArg::Static => ResidualSource::Static,
                        ResidArg::TimeVarying => ResidualSource::TimeVarying,
                    };
                    c.joint_resampling = !est.independent_resampling;
                    c.rescale = est.rescale;
                    c
                }
            };
            for path in pipeline::cmd_estimate(&c)? {
                println!("{}", path.display());
            }
            eprintln!(
                "replay with: tvfactor estimate --replay {}",
                c.out_dir.join(MANIFEST_FILE).display()
            );
        }
        Command::Plotdata {
            out,
            portfolio,
            coefficient,
        } => {
            let mut c = RunConfig::new(FactorModel::FF3, Region::Us);
            c.out_dir = out;
            let pick = |s: &str| (s != "all").then(|| s.to_string());
            let files = pipeline::cmd_plotdata(
                &c,
                pick(&portfolio).as_deref(),
                pick(&coefficient).as_deref(),
            )?;
            println!(
                "wrote {} files to {}",
                files.len(),
                c.out_dir.join("plot").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
