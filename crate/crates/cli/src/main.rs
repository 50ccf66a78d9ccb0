//! `tickimpact`: replay order events and report institutional price impact.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 invalid input
//! data, 3 numerical degeneracy (for example a singular regression design).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use tickimpact::pipeline::{self, AnalysisParams, PipelineError, RunConfig, RunManifest};
use tickimpact::regression::ImpactModel;
use tickimpact::synth::{FlowConfig, SegmentSpec};

#[derive(Debug, Parser)]
#[command(name = "tickimpact", version, about = "Order-book replay and institutional price-impact analytics")]
struct Cli {
    /// Run configuration; its parameters are the defaults for every command.
    #[arg(long, global = true, env = "TICKIMPACT_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for per-stock work; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(flatten)]
    params: ParamArgs,
    #[command(subcommand)]
    command: Command,
}

/// Analysis parameters; each overrides the config file value.
#[derive(Debug, Args)]
struct ParamArgs {
    /// Counter-move, as a fraction of the trend's log magnitude, that ends a trend.
    #[arg(long, global = true)]
    theta: Option<f64>,
    /// Counter-move, in multiples of the trend's mean daily log move, that ends a trend.
    #[arg(long, global = true)]
    kappa: Option<f64>,
    /// Event-study half window in milliseconds.
    #[arg(long, global = true)]
    window_ms: Option<i64>,
    /// Event-study bin width in milliseconds; must divide the window.
    #[arg(long, global = true)]
    bin_ms: Option<i64>,
    /// Drawup ratio at or above which a stock is rising.
    #[arg(long, global = true)]
    ratio_high: Option<f64>,
    /// Drawup ratio at or below which a stock is falling.
    #[arg(long, global = true)]
    ratio_low: Option<f64>,
    /// Look-back of the prior-volatility control in milliseconds.
    #[arg(long, global = true)]
    prior_window_ms: Option<i64>,
    /// Tick size in CNY.
    #[arg(long, global = true)]
    tick_cny: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate an order-event file and count events per stock.
    Ingest {
        #[arg(long)]
        orders: PathBuf,
        /// Drop malformed rows instead of failing.
        #[arg(long)]
        lenient: bool,
    },
    /// Rebuild the books and write tapes, snapshots and the transaction table.
    Replay {
        #[arg(long)]
        orders: PathBuf,
        /// Daily closes used to label each transaction with its trend.
        #[arg(long, requires = "date")]
        closes: Option<PathBuf>,
        #[arg(long)]
        actions: Option<PathBuf>,
        /// Trading date of the order file, for trend labels.
        #[arg(long, requires = "closes")]
        date: Option<NaiveDate>,
        #[arg(long)]
        lenient: bool,
    },
    /// Segment adjusted closes into drawups and drawdowns.
    Segment {
        #[arg(long)]
        closes: PathBuf,
        #[arg(long)]
        actions: Option<PathBuf>,
    },
    /// Mean price impact of purchases and sales by trend.
    Impact {
        #[arg(long)]
        transactions: PathBuf,
        #[arg(long)]
        ratios: PathBuf,
    },
    /// Binned returns and book structure around institutional transactions.
    Eventstudy {
        #[arg(long)]
        transactions: PathBuf,
        /// Directory holding `<stock>.csv` tapes and their `.fill_c.csv` files.
        #[arg(long)]
        tapes: PathBuf,
    },
    /// Regress price impact on float cap, book structure and prior volatility.
    Regress {
        #[arg(long)]
        transactions: PathBuf,
        #[arg(long)]
        summaries: PathBuf,
        /// Models to fit; all three by default.
        #[arg(long = "model", value_enum)]
        models: Vec<ModelArg>,
    },
    /// Generate seeded synthetic order flow and stock summaries.
    Synth {
        /// Flow configuration; defaults apply to missing keys.
        #[arg(long)]
        flow: Option<PathBuf>,
        /// Overrides the seed in the flow configuration.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate daily close series from planned trends.
    SynthSeries {
        /// `CODE=kind:days:log_change,...`, for example `600000=up:120:0.4,down:60:-0.3`.
        #[arg(long = "series", required = true)]
        series: Vec<String>,
        /// Standard deviation of the daily log noise.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Seed of the first series; later series add their position.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run every stage from the run configuration.
    Report {
        /// Seed override for a synthetic order flow.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    Pooled,
    Purchases,
    Sales,
}

impl From<ModelArg> for ImpactModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Pooled => ImpactModel::Pooled,
            ModelArg::Purchases => ImpactModel::Purchases,
            ModelArg::Sales => ImpactModel::Sales,
        }
    }
}

impl ParamArgs {
    fn apply(&self, config: &mut RunConfig) {
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut config.theta, self.theta);
        set(&mut config.kappa, self.kappa);
        set(&mut config.ratio_high, self.ratio_high);
        set(&mut config.ratio_low, self.ratio_low);
        set(&mut config.tick_cny, self.tick_cny);
        if let Some(v) = self.window_ms {
            config.window_ms = v;
        }
        if let Some(v) = self.bin_ms {
            config.bin_ms = v;
        }
        if let Some(v) = self.prior_window_ms {
            config.prior_window_ms = v;
        }
    }
}

fn parse_series(items: &[String]) -> Result<Vec<(String, Vec<SegmentSpec>)>, PipelineError> {
    items
        .iter()
        .map(|item| {
            let (code, plan) = item
                .split_once('=')
                .ok_or_else(|| PipelineError::Usage(format!("series {item:?} is not CODE=PLAN")))?;
            Ok((code.to_string(), SegmentSpec::parse_list(plan)?))
        })
        .collect()
}

fn load_flow(path: Option<&Path>, seed: Option<u64>) -> Result<FlowConfig, PipelineError> {
    let mut flow = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|source| PipelineError::Io { path: p.to_path_buf(), source })?;
            FlowConfig::from_toml_str(&text)?
        }
        None => FlowConfig::default(),
    };
    if let Some(seed) = seed {
        flow.seed = seed;
    }
    Ok(flow)
}

fn run(cli: Cli) -> Result<RunManifest, PipelineError> {
    pipeline::init_thread_pool(cli.jobs)?;
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cli.params.apply(&mut config);
    let params: AnalysisParams = config.params();
    let out = cli.out.as_path();
    match cli.command {
        Command::Ingest { orders, lenient } => pipeline::run_ingest(&orders, out, lenient),
        Command::Replay { orders, closes, actions, date, lenient } => {
            pipeline::run_replay(&orders, closes.as_deref(), actions.as_deref(), date, &params, lenient, out)
        }
        Command::Segment { closes, actions } => pipeline::run_segment(&closes, actions.as_deref(), &params, out),
        Command::Impact { transactions, ratios } => pipeline::run_impact(&transactions, &ratios, &params, out),
        Command::Eventstudy { transactions, tapes } => pipeline::run_eventstudy(&transactions, &tapes, &params, out),
        Command::Regress { transactions, summaries, models } => {
            let models: Vec<ImpactModel> = if models.is_empty() {
                vec![ImpactModel::Pooled, ImpactModel::Purchases, ImpactModel::Sales]
            } else {
                models.into_iter().map(ImpactModel::from).collect()
            };
            pipeline::run_regress(&transactions, &summaries, &models, out)
        }
        Command::Synth { flow, seed } => pipeline::run_synth(&load_flow(flow.as_deref(), seed)?, out),
        Command::SynthSeries { series, noise, seed } => {
            pipeline::run_synth_series(&parse_series(&series)?, noise, seed, out)
        }
        Command::Report { seed } => {
            if cli.config.is_none() {
                return Err(PipelineError::Usage("report needs --config".into()));
            }
            pipeline::run_report(&config, seed, out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(manifest) => {
            log::info!("wrote {} (manifest {})", manifest.output_dir, manifest.config_hash);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
