//! `drlatent` command-line front end.
//!
//! Exit codes: 0 on success, 1 when a computation fails, 2 for usage, input
//! and I/O problems.

mod config;
mod forecast;
mod ingest;
mod output;
mod reduction;
mod simulate;
mod store;
mod svg;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use drlatent::data::DataError;
use drlatent::forecast::Method;
use drlatent::Hour;

use config::RunConfig;

/// Bad flags, bad configuration or unusable input.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Parser, Debug)]
#[command(
    name = "drlatent",
    version,
    about = "Latent-variable load forecasting and demand-response reduction estimates"
)]
struct Cli {
    /// Base seed; per-user streams are derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML or JSON run configuration. Flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write synthetic meter, temperature, metadata and event files.
    Simulate(SimulateArgs),
    /// Filter, align and scale raw readings into a series store.
    Ingest(IngestArgs),
    /// Train on each user's early hours and forecast the rest.
    Forecast(ForecastArgs),
    /// Inject known reductions after a synthetic signup and score the estimates.
    Synth(SynthArgs),
    /// Estimate reductions at real events and summarise them by group.
    Reduction(ReductionArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    days: Option<usize>,
    #[arg(long)]
    signup_day: Option<usize>,
    #[arg(long)]
    event_fraction: Option<f64>,
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    meter: Option<PathBuf>,
    #[arg(long)]
    temperature: Option<PathBuf>,
    #[arg(long)]
    metadata: Option<PathBuf>,
    #[arg(long)]
    station: Option<String>,
    #[arg(long)]
    max_kwh: Option<f64>,
}

#[derive(Args, Debug)]
struct ForecastArgs {
    #[arg(long)]
    store: Option<PathBuf>,
    /// Comma-separated, e.g. `ols,ols+hmm`, or `all`.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    train_fraction: Option<f64>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    methods: Option<String>,
    /// Largest injected reduction c̄, scaled units.
    #[arg(long)]
    magnitude: Option<f64>,
    #[arg(long)]
    treat_fraction: Option<f64>,
    /// Synthetic signup shared by every user.
    #[arg(long)]
    signup: Option<String>,
}

#[derive(Args, Debug)]
struct ReductionArgs {
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long)]
    estimator: Option<String>,
    /// Placebo share of daytime control hours when a user has no events.
    #[arg(long)]
    treat_fraction: Option<f64>,
}

fn methods(s: &str) -> anyhow::Result<Vec<Method>> {
    Method::parse_list(s).map_err(|e| UsageError(e.to_string()).into())
}

fn resolve(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if let Some(o) = &cli.out {
        c.paths.out = o.clone();
    }
    macro_rules! set {
        ($field:expr, $value:expr) => {
            if let Some(v) = $value {
                $field = v;
            }
        };
    }
    match &cli.command {
        Command::Simulate(a) => {
            set!(c.simulate.users, a.users);
            set!(c.simulate.generator.days, a.days);
            set!(c.simulate.signup_day, a.signup_day);
            set!(c.simulate.event_fraction, a.event_fraction);
        }
        Command::Ingest(a) => {
            set!(c.paths.meter, a.meter.clone().map(Some));
            set!(c.paths.temperature, a.temperature.clone().map(Some));
            set!(c.paths.metadata, a.metadata.clone().map(Some));
            set!(c.station, a.station.clone().map(Some));
            set!(c.max_kwh, a.max_kwh);
        }
        Command::Forecast(a) => {
            set!(c.paths.store, a.store.clone().map(Some));
            set!(c.methods, a.methods.as_deref().map(methods).transpose()?);
            set!(c.train_fraction, a.train_fraction);
        }
        Command::Synth(a) => {
            set!(c.paths.store, a.store.clone().map(Some));
            set!(c.methods, a.methods.as_deref().map(methods).transpose()?);
            set!(c.magnitude, a.magnitude);
            set!(c.treat_fraction, a.treat_fraction);
            if let Some(s) = &a.signup {
                c.signup = Some(Hour::parse(s).map_err(|e| UsageError(format!("--signup: {e}")))?);
            }
        }
        Command::Reduction(a) => {
            set!(c.paths.store, a.store.clone().map(Some));
            set!(c.paths.events, a.events.clone().map(Some));
            if let Some(e) = &a.estimator {
                c.estimator = e
                    .parse()
                    .map_err(|e: drlatent::ForecastError| UsageError(e.to_string()))?;
            }
            set!(c.treat_fraction, a.treat_fraction);
        }
    }
    c.validate()?;
    Ok(c)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = resolve(&cli)?;
    let work = || match &cli.command {
        Command::Simulate(_) => simulate::run(&config),
        Command::Ingest(_) => ingest::run(&config),
        Command::Forecast(_) => forecast::run(&config),
        Command::Synth(_) => synth::run(&config),
        Command::Reduction(_) => reduction::run(&config),
    };
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build()?;
        pool.install(work)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = cli.jobs;
        work()
    }
}

/// 2 for anything caused by the caller's input or the file system.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<std::io::Error>() {
            return 2;
        }
        if let Some(d) = cause.downcast_ref::<DataError>() {
            return match d {
                DataError::Io { .. }
                | DataError::Parse { .. }
                | DataError::DuplicateKey { .. }
                | DataError::NonMonotone { .. }
                | DataError::AmbiguousStation(_)
                | DataError::UnknownStation(_) => 2,
                _ => 1,
            };
        }
        if let Some(drlatent::CausalError::Events { .. }) = cause.downcast_ref::<drlatent::CausalError>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
