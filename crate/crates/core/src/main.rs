use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lobsmile::dejd::DejdParams;
use lobsmile::fitting::{FitConfig, LevelSelector, SmileConfig, SmileDrift, SmileTarget, StrictConstraints};
use lobsmile::ingest::{parse_timestamp, FeedConfig, GridAnchor, ResampleConfig, StartPrice};
use lobsmile::report::{
    cmd_fit, cmd_ingest, cmd_simulate, cmd_smile, cmd_summary, FitRun, ModelChoice, SimFormat, SimulateRun, SmileRun,
};
use lobsmile::simulator::BookSpec;
use lobsmile::Error;

#[derive(Parser)]
#[command(
    name = "lobsmile",
    version,
    about = "Order-book reconstruction, impatience-rate fitting and LOB-implied volatility"
)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "LOBSMILE_OUT_DIR", default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rebuild book snapshots and executions from a raw feed.
    Ingest {
        /// Raw feed file.
        input: PathBuf,
        #[command(flatten)]
        book: BookArgs,
    },
    /// Fit impatience rates and write results, diagnostics and a summary.
    Fit(FitArgs),
    /// Extract the LOB-implied volatility smile.
    Smile(SmileArgs),
    /// Simulate a price path and write it as a raw feed or CSV.
    Simulate(SimArgs),
    /// Build a summary row from results files.
    Summary {
        /// Date cell of the row.
        #[arg(long)]
        date: String,
        /// `gbm_results.csv` from a previous fit.
        #[arg(long)]
        gbm: Option<PathBuf>,
        /// `dejd_results.csv` from a previous fit.
        #[arg(long)]
        dejd: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct BookArgs {
    /// Number of book levels per side.
    #[arg(long, default_value_t = 5)]
    depth: usize,
    /// Tick size in quote units.
    #[arg(long, default_value_t = 0.5)]
    tick: f64,
}

#[derive(Args, Clone)]
struct GridArgs {
    #[command(flatten)]
    book: BookArgs,
    /// Grid spacing in seconds.
    #[arg(long, default_value_t = 30.0)]
    dt_s: f64,
    /// First grid time as HH:MM:SS:mmm (default: first snapshot).
    #[arg(long)]
    anchor: Option<String>,
    /// Reference price for distances: `best` or `mid`.
    #[arg(long, default_value = "best")]
    start_price: String,
    /// Rolling window length.
    #[arg(long, default_value_t = 30)]
    window: usize,
}

impl GridArgs {
    fn feed(&self) -> FeedConfig {
        FeedConfig { depth: self.book.depth, tick: self.book.tick }
    }

    fn resample(&self) -> Result<ResampleConfig, Error> {
        let anchor = match &self.anchor {
            None => GridAnchor::FirstSnapshot,
            Some(s) => {
                GridAnchor::At(parse_timestamp(s).ok_or_else(|| Error::Config(format!("bad anchor time `{s}`")))?)
            }
        };
        Ok(ResampleConfig { dt_s: self.dt_s, anchor, start_price: self.start_price.parse::<StartPrice>()? })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Gbm,
    Dejd,
    Both,
}

#[derive(Args)]
struct FitArgs {
    /// Raw feed file.
    input: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    /// Price model to fit.
    #[arg(long, value_enum, default_value = "both")]
    model: ModelArg,
    /// Points per block in the diffusion fit.
    #[arg(long, default_value_t = 2)]
    steps: usize,
    /// Lower bound on the impatience rate.
    #[arg(long, default_value_t = 0.01)]
    r_min: f64,
    /// Starting impatience rate.
    #[arg(long, default_value_t = 1.0)]
    r0: f64,
    /// Initial utility (default: model utility at r0).
    #[arg(long)]
    u0: Option<f64>,
    /// Jump-rate continuity bound.
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    /// Scalar search tolerance.
    #[arg(long, default_value_t = 1e-8)]
    delta: f64,
    /// Evaluation budget of each simplex search.
    #[arg(long, default_value_t = 3000)]
    max_iter: usize,
    /// Rate time unit in seconds (default: one grid step).
    #[arg(long)]
    time_unit_s: Option<f64>,
    /// Level supplying the distance: `deepest` or an index.
    #[arg(long, default_value = "deepest")]
    level: String,
    /// Force equal up and down jump rates.
    #[arg(long)]
    equal_etas: bool,
    /// Bound the change of the jump intensity between points.
    #[arg(long)]
    lambda_continuity: bool,
    /// Bound the change of the up-jump probability between points.
    #[arg(long)]
    p_continuity: bool,
    /// Trading date written to the summary (default: input file stem).
    #[arg(long)]
    date: Option<String>,
    /// Tolerated fraction of failed points before exiting with status 2.
    #[arg(long, default_value_t = 0.2)]
    invalid_budget: f64,
    /// Relative utility change that starts a new diagnostics segment.
    #[arg(long, default_value_t = 0.05)]
    segment_jump: f64,
}

#[derive(Args)]
struct SmileArgs {
    /// Raw feed file.
    input: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    /// Impatience rate used for every quote.
    #[arg(long, default_value_t = 0.5)]
    r_fixed: f64,
    /// Target utility used for every quote.
    #[arg(long, default_value_t = 0.2355)]
    c_fixed: f64,
    /// Use the rolling drift estimate instead of zero drift.
    #[arg(long)]
    estimated_drift: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Raw,
    Csv,
}

#[derive(Args)]
struct SimArgs {
    /// Drift per time unit.
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    /// Diffusive volatility per square-root time unit.
    #[arg(long, default_value_t = 0.002)]
    sigma: f64,
    /// Jump intensity; zero simulates a diffusion.
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// Probability that a jump is upward.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Rate of the exponential upward jump sizes.
    #[arg(long, default_value_t = 100.0)]
    eta1: f64,
    /// Rate of the exponential downward jump sizes.
    #[arg(long, default_value_t = 100.0)]
    eta2: f64,
    /// Time unit of the parameters in seconds.
    #[arg(long, default_value_t = 30.0)]
    time_unit_s: f64,
    /// Starting price.
    #[arg(long, default_value_t = 6000.0)]
    s0: f64,
    /// Time of the first event, HH:MM:SS:mmm.
    #[arg(long, default_value = "09:00:00:000")]
    start: String,
    /// Length of the simulated session in seconds.
    #[arg(long, default_value_t = 30600.0)]
    horizon_s: f64,
    /// Milliseconds between price events.
    #[arg(long, default_value_t = 1000)]
    event_ms: i64,
    #[command(flatten)]
    book: BookArgs,
    /// Smallest order size at a level.
    #[arg(long, default_value_t = 1)]
    size_min: u64,
    /// Largest order size at a level.
    #[arg(long, default_value_t = 50)]
    size_max: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `raw` writes a level-update feed, `csv` the bare price path.
    #[arg(long, value_enum, default_value = "raw")]
    format: FormatArg,
}

enum Failure {
    Input(Error),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) | Error::Solver(_) => Failure::Numeric(e.to_string()),
            other => Failure::Input(other),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let out = cli.out;
    match cli.command {
        Command::Ingest { input, book } => {
            let feed = FeedConfig { depth: book.depth, tick: book.tick };
            let s = cmd_ingest(&input, &out, &feed)?;
            println!(
                "{} updates, {} snapshots, {} executions, {} skipped",
                s.updates, s.snapshots, s.executions, s.skipped
            );
        }
        Command::Fit(a) => {
            let model = match a.model {
                ModelArg::Gbm => ModelChoice::Gbm,
                ModelArg::Dejd => ModelChoice::Dejd,
                ModelArg::Both => ModelChoice::Both,
            };
            let fit = FitConfig {
                window_n: a.grid.window,
                time_unit_s: a.time_unit_s,
                steps: a.steps,
                r_min: a.r_min,
                r0: a.r0,
                u0: a.u0,
                eps: a.eps,
                delta: a.delta,
                max_iter: a.max_iter,
                level: a.level.parse::<LevelSelector>()?,
                strict: StrictConstraints {
                    equal_etas: a.equal_etas,
                    lambda_continuity: a.lambda_continuity,
                    p_continuity: a.p_continuity,
                },
                ..FitConfig::default()
            };
            let run = FitRun {
                input: a.input,
                out_dir: out,
                feed: a.grid.feed(),
                resample: a.grid.resample()?,
                fit,
                model,
                date: a.date,
                invalid_budget: a.invalid_budget,
                segment_jump: a.segment_jump,
            };
            let outcome = cmd_fit(&run)?;
            println!("{}", outcome.summary.to_csv_row());
            if outcome.budget_exceeded {
                return Err(Failure::Numeric(format!(
                    "more than {:.0}% of points failed to fit",
                    100.0 * run.invalid_budget
                )));
            }
        }
        Command::Smile(a) => {
            let run = SmileRun {
                input: a.input,
                out_dir: out,
                feed: a.grid.feed(),
                resample: a.grid.resample()?,
                window_n: a.grid.window,
                smile: SmileConfig {
                    r: a.r_fixed,
                    target: SmileTarget::Constant(a.c_fixed),
                    drift: if a.estimated_drift { SmileDrift::Estimated } else { SmileDrift::Zero },
                    dt: 1.0,
                },
            };
            let smile = cmd_smile(&run)?;
            println!("{} smile points, {} skipped", smile.points.len(), smile.skipped);
        }
        Command::Simulate(a) => {
            let start_ms =
                parse_timestamp(&a.start).ok_or_else(|| Error::Config(format!("bad start time `{}`", a.start)))?;
            let run = SimulateRun {
                out_dir: out,
                params: DejdParams { mu: a.mu, sigma: a.sigma, lambda: a.lambda, p: a.p, eta1: a.eta1, eta2: a.eta2 },
                time_unit_s: a.time_unit_s,
                s0: a.s0,
                start_ms,
                horizon_s: a.horizon_s,
                event_ms: a.event_ms,
                book: BookSpec {
                    depth: a.book.depth,
                    tick: a.book.tick,
                    size_min: a.size_min,
                    size_max: a.size_max,
                    seed: a.seed,
                },
                seed: a.seed,
                format: match a.format {
                    FormatArg::Raw => SimFormat::Raw,
                    FormatArg::Csv => SimFormat::Csv,
                },
            };
            let path = cmd_simulate(&run)?;
            println!("{}", path.display());
        }
        Command::Summary { date, gbm, dejd } => {
            let row = cmd_summary(&date, gbm.as_deref(), dejd.as_deref(), &out)?;
            println!("{}", row.to_csv_row());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
