//! `eventlag` command-line interface.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use eventlag::core::clustering::Distance;
use eventlag::core::detect::{DetectorConfig, Direction, Method};
use eventlag::core::events::EventExtractionConfig;
use eventlag::core::predict::Anchor;
use eventlag::core::series::{WindowMode, WindowSpec};
use eventlag::core::significance::RandomizationConfig;
use eventlag::eventio::{read_jsonl, write_jsonl};
use eventlag::ingest::{write_transactions, write_tweet_counts, SignalChannel};
use eventlag::output::{write_error, OutputDir};
use eventlag::parallel::run_significance_parallel;
use eventlag::pipeline::{
    brand_events, cluster_count, cluster_records, extract_all, load_config, load_files,
    run_pipeline, write_significance, ClusteringConfig, InputSource, RunConfig, DEFAULT_HORIZON,
};
use eventlag::synth::{generate_synthetic, SynthSpec};
use eventlag::{Error, Result};

#[derive(Parser)]
#[command(name = "eventlag", version, about = "Event detection, shape clustering and lagged predictive analysis of daily series")]
struct Cli {
    /// More log output (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic tweet counts, transactions and a ground-truth manifest
    Synth(SynthCmd),
    /// Detect spikes and extract events on both channels
    Detect(DetectCmd),
    /// Cluster signal events by shape
    Cluster(ClusterCmd),
    /// Match signal to target events and run the randomization test
    Analyze(AnalyzeCmd),
    /// Run every stage end to end
    Pipeline(PipelineCmd),
}

#[derive(Args)]
struct InputArgs {
    /// Tweet counts CSV (date,brand_id,pos,neg,volume)
    #[arg(long)]
    tweets: PathBuf,
    /// Transactions CSV (timestamp,brand_id,value)
    #[arg(long)]
    transactions: PathBuf,
    #[command(flatten)]
    signal: SignalArgs,
}

#[derive(Args, Clone, Copy)]
struct SignalArgs {
    /// Signal built from the tweet counts
    #[arg(long, value_enum, default_value = "ratio")]
    channel: ChannelArg,
    /// Use positive/negative instead of negative/positive
    #[arg(long)]
    invert_ratio: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    Ratio,
    Volume,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Esd,
    Hampel,
    Iqr,
}

#[derive(Clone, Copy, ValueEnum)]
enum WindowArg {
    Weekday,
    Contiguous,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistanceArg {
    Euclidean,
    Dtw,
    Slopes,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnchorArg {
    Start,
    Peak,
}

#[derive(Args, Clone)]
struct DetectorArgs {
    #[arg(long, value_enum, default_value = "iqr")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "weekday")]
    window_mode: WindowArg,
    /// Prior points in the moving window
    #[arg(long, default_value_t = 7)]
    window: usize,
    /// Put the candidate day in its own window (default: ESD only)
    #[arg(long)]
    include_current: Option<bool>,
    /// Prior points required before a day is scored (default: --window)
    #[arg(long)]
    min_history: Option<usize>,
    #[arg(long, default_value_t = 3.0)]
    t_esd: f64,
    #[arg(long, default_value_t = 3.0)]
    hampel_threshold: f64,
    #[arg(long, default_value_t = eventlag::core::detect::MAD_CONSISTENCY)]
    mad_consistency: f64,
    #[arg(long, default_value_t = 1.5)]
    iqr_k: f64,
    /// Flag low outliers too
    #[arg(long)]
    two_sided: bool,
    /// Allow days filled in at ingestion to be flagged
    #[arg(long)]
    keep_filled: bool,
    /// Farthest an event may reach from its peak, in days
    #[arg(long, default_value_t = 14)]
    max_dist: usize,
    /// Days looked past a local minimum while descending
    #[arg(long, default_value_t = 3)]
    lookahead: usize,
}

impl DetectorArgs {
    fn configs(&self) -> (DetectorConfig, EventExtractionConfig) {
        let method = match self.method {
            MethodArg::Esd => Method::Esd,
            MethodArg::Hampel => Method::Hampel,
            MethodArg::Iqr => Method::Iqr,
        };
        let mode = match self.window_mode {
            WindowArg::Weekday => WindowMode::WeekdayAligned,
            WindowArg::Contiguous => WindowMode::Contiguous,
        };
        let window = WindowSpec {
            min_history: self.min_history,
            ..WindowSpec::new(mode, self.window)
                .including_current(self.include_current.unwrap_or(method == Method::Esd))
        };
        let detector = DetectorConfig {
            t_esd: self.t_esd,
            hampel_threshold: self.hampel_threshold,
            mad_consistency: self.mad_consistency,
            iqr_k: self.iqr_k,
            skip_filled: !self.keep_filled,
            ..DetectorConfig::new(method)
                .with_window(window)
                .with_direction(if self.two_sided { Direction::TwoSided } else { Direction::UpperOnly })
        };
        let extraction = EventExtractionConfig {
            max_dist: self.max_dist,
            lookahead: self.lookahead,
            ..Default::default()
        };
        (detector, extraction)
    }
}

#[derive(Args, Clone)]
struct ClusterArgs {
    /// Number of clusters
    #[arg(long, default_value_t = 6)]
    k: usize,
    #[arg(long, value_enum, default_value = "slopes")]
    distance: DistanceArg,
    /// Seed for centroid initialisation
    #[arg(long, default_value_t = 0)]
    cluster_seed: u64,
}

impl ClusterArgs {
    fn config(&self) -> ClusteringConfig {
        ClusteringConfig {
            k: self.k,
            distance: match self.distance {
                DistanceArg::Euclidean => Distance::Euclidean,
                DistanceArg::Dtw => Distance::Dtw,
                DistanceArg::Slopes => Distance::Slopes,
            },
            seed: self.cluster_seed,
        }
    }
}

#[derive(Args, Clone)]
struct SignificanceArgs {
    /// Randomized placements
    #[arg(long, default_value_t = 1000)]
    runs: usize,
    /// Longest signal-to-target distance considered, in days
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    horizon: u32,
    /// Windows for successful-event counts
    #[arg(long, value_delimiter = ',', default_values_t = [7u32, 21])]
    windows: Vec<u32>,
    /// Day of each event distances are measured from
    #[arg(long, value_enum, default_value = "start")]
    anchor: AnchorArg,
    /// Also report 2.5%/97.5% percentile bounds
    #[arg(long)]
    percentile: bool,
    /// Write every run's randomized curves
    #[arg(long)]
    dump_runs: bool,
}

impl SignificanceArgs {
    fn config(&self, seed: u64) -> RandomizationConfig {
        RandomizationConfig {
            runs: self.runs,
            percentile: self.percentile,
            windows: self.windows.clone(),
            anchor: match self.anchor {
                AnchorArg::Start => Anchor::Start,
                AnchorArg::Peak => Anchor::Peak,
            },
            ..RandomizationConfig::new(seed)
        }
    }
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    #[arg(long, default_value_t = 3)]
    brands: usize,
    #[arg(long, default_value_t = 730)]
    days: usize,
    #[arg(long, default_value = "2013-01-07")]
    start_date: NaiveDate,
    #[arg(long, default_value_t = 12)]
    signal_events: usize,
    #[arg(long, default_value_t = 8)]
    independent_targets: usize,
    /// Share of signal events followed by a target event
    #[arg(long, default_value_t = 0.0)]
    coupling: f64,
    /// Days from a coupled signal event to its target event
    #[arg(long, default_value_t = 3)]
    lag: usize,
    #[arg(long, default_value_t = 12)]
    min_len: usize,
    #[arg(long, default_value_t = 42)]
    max_len: usize,
    #[arg(long, default_value_t = 0.1)]
    slope_noise: f64,
    /// Drop day-level noise
    #[arg(long)]
    no_noise: bool,
    #[arg(long, default_value_t = 56)]
    warmup: usize,
}

impl ScenarioArgs {
    fn spec(&self) -> SynthSpec {
        SynthSpec {
            brands: self.brands,
            days: self.days,
            start_date: self.start_date,
            signal_events: self.signal_events,
            independent_targets: self.independent_targets,
            coupling_fraction: self.coupling,
            lag: self.lag,
            min_len: self.min_len,
            max_len: self.max_len,
            slope_noise: self.slope_noise,
            noise: !self.no_noise,
            warmup: self.warmup,
        }
    }
}

#[derive(Args)]
struct SynthCmd {
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DetectCmd {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    detector: DetectorArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClusterCmd {
    /// Signal events JSONL
    #[arg(long)]
    events: PathBuf,
    #[command(flatten)]
    cluster: ClusterArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeCmd {
    #[arg(long)]
    signal_events: PathBuf,
    #[arg(long)]
    target_events: PathBuf,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    significance: SignificanceArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineCmd {
    /// JSON run configuration; other input and tuning flags are ignored
    #[arg(long, conflicts_with_all = ["tweets", "transactions", "synthetic"])]
    config: Option<PathBuf>,
    #[arg(long, requires = "transactions")]
    tweets: Option<PathBuf>,
    #[arg(long, requires = "tweets")]
    transactions: Option<PathBuf>,
    /// Generate the input instead of reading files
    #[arg(long, conflicts_with = "tweets")]
    synthetic: bool,
    /// Seed for the randomization test (and the synthetic data)
    #[arg(long, required_unless_present = "config")]
    seed: Option<u64>,
    #[command(flatten)]
    signal: SignalArgs,
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    detector: DetectorArgs,
    /// Cluster signal events into k shape types
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value = "slopes")]
    distance: DistanceArg,
    #[arg(long, default_value_t = 0)]
    cluster_seed: u64,
    #[command(flatten)]
    significance: SignificanceArgs,
    #[arg(long)]
    out: PathBuf,
}

fn signal_channel(a: &SignalArgs) -> SignalChannel {
    match a.channel {
        ChannelArg::Ratio => SignalChannel::Ratio,
        ChannelArg::Volume => SignalChannel::Volume,
    }
}

impl PipelineCmd {
    fn run_config(&self) -> Result<RunConfig> {
        if let Some(path) = &self.config {
            return load_config(path);
        }
        let seed = self.seed.expect("required by clap");
        let input = match (&self.tweets, &self.transactions, self.synthetic) {
            (Some(t), Some(x), false) => InputSource::Files {
                tweets: t.clone(),
                transactions: x.clone(),
            },
            (None, None, true) => InputSource::Synthetic {
                spec: self.scenario.spec(),
                seed,
            },
            _ => {
                return Err(Error::Config(
                    "give either --tweets and --transactions, or --synthetic".into(),
                ))
            }
        };
        let (detector, extraction) = self.detector.configs();
        Ok(RunConfig {
            signal_channel: signal_channel(&self.signal),
            invert_ratio: self.signal.invert_ratio,
            detector,
            extraction,
            clustering: self.k.map(|k| {
                ClusterArgs {
                    k,
                    distance: self.distance,
                    cluster_seed: self.cluster_seed,
                }
                .config()
            }),
            horizon: self.significance.horizon,
            randomization: self.significance.config(seed),
            dump_runs: self.significance.dump_runs,
            ..RunConfig::new(input, seed)
        })
    }
}

/// Run `body` against a staged output directory, recording failures.
fn staged(root: &Path, stage: &str, body: impl FnOnce(&mut OutputDir) -> Result<()>) -> Result<()> {
    let run = || -> Result<()> {
        let mut out = OutputDir::create(root)?;
        body(&mut out)?;
        out.commit()?;
        Ok(())
    };
    run().inspect_err(|e| {
        if let Err(w) = write_error(root, stage, e) {
            log::error!("could not write error record: {w}");
        }
    })
}

fn synth(cmd: &SynthCmd) -> Result<()> {
    staged(&cmd.out, "synth", |out| {
        let data = generate_synthetic(&cmd.scenario.spec(), cmd.seed)?;
        write_tweet_counts(&out.staged_path("tweets.csv")?, &data.tweets)?;
        write_transactions(&out.staged_path("transactions.csv")?, &data.transactions)?;
        out.write_json("manifest.json", &data.manifest)
    })
}

fn detect(cmd: &DetectCmd) -> Result<()> {
    staged(&cmd.out, "detect", |out| {
        let (detector, extraction) = cmd.detector.configs();
        detector.validate()?;
        extraction.validate()?;
        let brands = load_files(
            &cmd.input.tweets,
            &cmd.input.transactions,
            signal_channel(&cmd.input.signal),
            cmd.input.signal.invert_ratio,
        )?;
        let (signal, target) = extract_all(&brands, &detector, &extraction)?;
        log::info!("{} signal and {} target events", signal.len(), target.len());
        write_jsonl(&out.staged_path("events/signal.jsonl")?, &signal)?;
        write_jsonl(&out.staged_path("events/target.jsonl")?, &target)
    })
}

fn cluster(cmd: &ClusterCmd) -> Result<()> {
    staged(&cmd.out, "cluster", |out| {
        let mut events = read_jsonl(&cmd.events)?;
        let model = cluster_records(&mut events, &cmd.cluster.config())?;
        out.write_json("model.json", &model)?;
        write_jsonl(&out.staged_path("events/signal.jsonl")?, &events)
    })
}

fn analyze(cmd: &AnalyzeCmd) -> Result<()> {
    staged(&cmd.out, "significance", |out| {
        let signal = read_jsonl(&cmd.signal_events)?;
        let target = read_jsonl(&cmd.target_events)?;
        let brands = brand_events(&signal, &target)?;
        let cfg = cmd.significance.config(cmd.seed);
        let report =
            run_significance_parallel(&brands, cluster_count(&signal), &cfg, cmd.significance.horizon)?;
        write_significance(out, &report, cmd.significance.dump_runs)
    })
}

fn pipeline(cmd: &PipelineCmd) -> Result<()> {
    let cfg = cmd.run_config()?;
    let summary = run_pipeline(&cfg, &cmd.out).map_err(|e| e.error)?;
    log::info!(
        "{} brands, {} signal events, {} target events, {} files",
        summary.brands,
        summary.signal_events,
        summary.target_events,
        summary.files.len()
    );
    Ok(())
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
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    let result = match &cli.command {
        Command::Synth(c) => synth(c),
        Command::Detect(c) => detect(c),
        Command::Cluster(c) => cluster(c),
        Command::Analyze(c) => analyze(c),
        Command::Pipeline(c) => pipeline(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
