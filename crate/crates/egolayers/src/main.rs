use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{ArgGroup, Args, Parser, Subcommand};
use egolayers::config::{AlgorithmChoice, Base, Counting, Jaccard, Marginals, Rule};
use egolayers::manifest::{Manifest, StageStatus};
use egolayers::pipeline::{self, load_network, ConfigError, EventSource, LayerSet, Runner, Start, TamaritSampling};
use egolayers::{parallel, RunConfig};
use egolayers_core::synth::{CoordinatedGroups, LayeredConfig, OrderLogConfig};

/// Statistically validated interaction networks and ego-network layers.
#[derive(Parser)]
#[command(name = "egolayers", version)]
struct Cli {
    #[command(flatten)]
    settings: Settings,
    #[command(subcommand)]
    command: Command,
}

/// Analysis settings. Precedence: flags, then `--config`, then defaults.
#[derive(Args)]
struct Settings {
    /// TOML file with analysis settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Co-occurrence window in seconds.
    #[arg(long, global = true)]
    window_seconds: Option<u64>,
    /// Minimum co-occurrences for an investor edge.
    #[arg(long, global = true)]
    min_cooccurrence: Option<u64>,
    /// How co-occurrences are counted within a window.
    #[arg(long, global = true, value_enum)]
    counting: Option<Counting>,
    /// Offset of the day boundary from UTC midnight, in seconds.
    #[arg(long, global = true, allow_hyphen_values = true)]
    day_offset_seconds: Option<i64>,
    /// Calls that enter the call-network marginals.
    #[arg(long, global = true, value_enum)]
    cn_marginals: Option<Marginals>,
    /// Family-wise significance level.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Directions that must be significant to keep an edge.
    #[arg(long, global = true, value_enum)]
    rule: Option<Rule>,
    /// Number of tests the Bonferroni correction divides by.
    #[arg(long, global = true, value_enum)]
    threshold_base: Option<Base>,
    /// Also report validation under the other threshold base.
    #[arg(long, global = true)]
    both_bases: bool,
    /// Egos need a degree above this value.
    #[arg(long, global = true)]
    degree_floor: Option<u64>,
    /// Largest k-means cluster count considered.
    #[arg(long, global = true)]
    k_max: Option<usize>,
    /// Layer algorithms to run.
    #[arg(long = "algorithm", global = true, value_enum, value_delimiter = ',')]
    algorithms: Vec<AlgorithmChoice>,
    /// Jaccard variant for comparing k-means and H/T-break layers.
    #[arg(long, global = true, value_enum)]
    jaccard: Option<Jaccard>,
    /// Parametric-bootstrap resamples for degree fits.
    #[arg(long, global = true)]
    bootstrap: Option<usize>,
    /// Population size N for the layer model.
    #[arg(long, global = true)]
    population: Option<u64>,
    /// Seed for synthetic data and bootstrap resamples.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Field delimiter of the event logs.
    #[arg(long, global = true)]
    delimiter: Option<char>,
}

impl Settings {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(if let Some(v) = self.$field { c.$field = v; })*};
        }
        set!(threads, window_seconds, min_cooccurrence, counting, day_offset_seconds, cn_marginals, alpha, rule);
        set!(threshold_base, degree_floor, k_max, jaccard, bootstrap, seed);
        if self.both_bases {
            c.both_bases = true;
        }
        if self.population.is_some() {
            c.population = self.population;
        }
        if !self.algorithms.is_empty() {
            c.algorithms = self.algorithms.clone();
        }
        if let Some(d) = self.delimiter {
            c.order_schema.delimiter = d;
            c.call_schema.delimiter = d;
        }
        c.check()?;
        Ok(c)
    }
}

#[derive(Args)]
struct OutDir {
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Build the investor network from an order log.
    BuildEin {
        /// Order log (investor_id, stock_id, side, timestamp).
        #[arg(long)]
        orders: PathBuf,
        /// Ids to exclude, one per line.
        #[arg(long)]
        blocklist: Option<PathBuf>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Build the reciprocal-call network from a call log.
    BuildCn {
        /// Call log (caller_id, callee_id, timestamp).
        #[arg(long)]
        calls: PathBuf,
        /// Ids to exclude, one per line.
        #[arg(long)]
        blocklist: Option<PathBuf>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Keep only statistically validated edges.
    Validate {
        /// Network file written by a build or validate stage.
        #[arg(long)]
        network: PathBuf,
        #[command(flatten)]
        out: OutDir,
    },
    /// Degree census and distribution fits.
    FitDegrees {
        /// Network file written by a build or validate stage.
        #[arg(long)]
        network: PathBuf,
        #[command(flatten)]
        out: OutDir,
    },
    /// Per-ego layer detection.
    Layers {
        /// Network file written by a build or validate stage.
        #[arg(long)]
        network: PathBuf,
        #[command(flatten)]
        out: OutDir,
    },
    /// Layer-model estimates from layer files.
    Tamarit {
        /// Layer files written by the layers stage.
        #[arg(long, num_args = 1.., required = true)]
        layers: Vec<PathBuf>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Layer census and algorithm comparison from layer files.
    Census {
        /// Layer files written by the layers stage.
        #[arg(long, num_args = 1.., required = true)]
        layers: Vec<PathBuf>,
        /// Per-ego model estimates to report alongside.
        #[arg(long)]
        tamarit: Option<PathBuf>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Synthetic inputs.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Every stage from an event log or network file.
    #[command(group(ArgGroup::new("input").required(true).args(["orders", "calls", "network"])))]
    RunAll {
        /// Start from an order log.
        #[arg(long)]
        orders: Option<PathBuf>,
        /// Start from a call log.
        #[arg(long)]
        calls: Option<PathBuf>,
        /// Start from a network file, skipping the build stage.
        #[arg(long)]
        network: Option<PathBuf>,
        /// Ids to exclude, one per line.
        #[arg(long)]
        blocklist: Option<PathBuf>,
        #[command(flatten)]
        out: OutDir,
    },
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Order log with independent investors and optional copying groups.
    Orders {
        #[arg(long, default_value_t = 200)]
        investors: usize,
        #[arg(long, default_value_t = 10)]
        stocks: usize,
        #[arg(long, default_value_t = 20)]
        days: usize,
        /// Mean orders per investor per day.
        #[arg(long, default_value_t = 40.0)]
        orders_per_day: f64,
        /// Copying groups (0 for a pure null log).
        #[arg(long, default_value_t = 0)]
        groups: usize,
        #[arg(long, default_value_t = 5)]
        group_size: usize,
        #[arg(long, default_value_t = 0.5)]
        follow_probability: f64,
        #[arg(long, default_value_t = 10)]
        max_lag_seconds: u64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Ego networks with planted 5/10/35/100 bands and a truth sidecar.
    Layered {
        #[arg(long, default_value_t = 100)]
        egos: usize,
        /// Standard deviation of alter weights within a band (band means
        /// are 100 apart; at most 25).
        #[arg(long, default_value_t = 10.0)]
        dispersion: f64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Layer compositions drawn from the layer model.
    Tamarit {
        #[arg(long, default_value_t = 2000)]
        egos: usize,
        #[arg(long, default_value_t = 1.0986122886681098, allow_hyphen_values = true)]
        /// Layer-model parameter (default ln 3).
        mu: f64,
        /// Alters per ego.
        #[arg(long, default_value_t = 150)]
        total: u64,
        #[arg(long, default_value_t = 4)]
        layers: usize,
        #[command(flatten)]
        out: OutDir,
    },
}

fn single_stage(
    cfg: &RunConfig,
    dir: &Path,
    command: &str,
    inputs: &[&Path],
    stage: impl FnOnce(&mut pipeline::Outputs) -> Result<()> + Send,
) -> Result<Manifest> {
    parallel::pool(cfg.threads)?.install(|| {
        let mut runner = Runner::new(dir, command, cfg, inputs)?;
        runner.stage(command, stage, |_| Ok(()))?;
        runner.finish()
    })
}

fn read_layer_set(paths: &[PathBuf]) -> Result<LayerSet> {
    let mut set: LayerSet = Vec::new();
    for p in paths {
        let records = pipeline::read_layer_file(p)?;
        let alg = pipeline::algorithm_of(&records, p)?;
        if set.iter().any(|(a, _)| *a == alg) {
            anyhow::bail!("two layer files for algorithm {}", alg.name());
        }
        set.push((alg, records));
    }
    set.sort_by_key(|(a, _)| *a as u8);
    Ok(set)
}

fn run(cli: Cli) -> Result<Manifest> {
    let cfg = cli.settings.resolve().map_err(ConfigError)?;
    match cli.command {
        Command::BuildEin { orders, blocklist, out } => {
            let source = EventSource::Orders(orders.clone());
            let mut inputs = vec![orders.as_path()];
            inputs.extend(blocklist.as_deref());
            single_stage(&cfg, &out.out, "build-ein", &inputs, |o| {
                pipeline::build_stage(o, &source, blocklist.as_deref(), &cfg).map(drop)
            })
        }
        Command::BuildCn { calls, blocklist, out } => {
            let source = EventSource::Calls(calls.clone());
            let mut inputs = vec![calls.as_path()];
            inputs.extend(blocklist.as_deref());
            single_stage(&cfg, &out.out, "build-cn", &inputs, |o| {
                pipeline::build_stage(o, &source, blocklist.as_deref(), &cfg).map(drop)
            })
        }
        Command::Validate { network, out } => {
            let net = load_network(&network).map_err(ConfigError)?;
            single_stage(&cfg, &out.out, "validate", &[&network], |o| {
                pipeline::validate_stage(o, &net, &cfg).map(drop)
            })
        }
        Command::FitDegrees { network, out } => {
            let net = load_network(&network).map_err(ConfigError)?;
            single_stage(&cfg, &out.out, "fit-degrees", &[&network], |o| pipeline::fit_stage(o, &net, &cfg))
        }
        Command::Layers { network, out } => {
            let net = load_network(&network).map_err(ConfigError)?;
            single_stage(&cfg, &out.out, "layers", &[&network], |o| {
                pipeline::layers_stage(o, &net, &cfg).map(drop)
            })
        }
        Command::Tamarit { layers, out } => {
            let set = read_layer_set(&layers).map_err(ConfigError)?;
            let population = cfg.population.unwrap_or_else(|| pipeline::population_of(&set));
            let inputs: Vec<&Path> = layers.iter().map(PathBuf::as_path).collect();
            single_stage(&cfg, &out.out, "tamarit", &inputs, |o| {
                pipeline::tamarit_stage(o, &set, population).map(drop)
            })
        }
        Command::Census { layers, tamarit, out } => {
            let set = read_layer_set(&layers).map_err(ConfigError)?;
            let rows = match &tamarit {
                Some(p) => pipeline::load_tamarit(p).map_err(ConfigError)?,
                None => Vec::new(),
            };
            let mut inputs: Vec<&Path> = layers.iter().map(PathBuf::as_path).collect();
            inputs.extend(tamarit.as_deref());
            single_stage(&cfg, &out.out, "census", &inputs, |o| pipeline::census_stage(o, &set, &rows, &cfg))
        }
        Command::Synth(s) => synth(s, &cfg),
        Command::RunAll { orders, calls, network, blocklist, out } => {
            let start = match (orders, calls, network) {
                (Some(p), _, _) => Start::Events(EventSource::Orders(p)),
                (_, Some(p), _) => Start::Events(EventSource::Calls(p)),
                (_, _, Some(p)) => Start::Network(p),
                _ => unreachable!("clap requires one input"),
            };
            pipeline::run_all(&start, blocklist.as_deref(), &out.out, &cfg)
        }
    }
}

fn synth(cmd: SynthCommand, cfg: &RunConfig) -> Result<Manifest> {
    match cmd {
        SynthCommand::Orders {
            investors,
            stocks,
            days,
            orders_per_day,
            groups,
            group_size,
            follow_probability,
            max_lag_seconds,
            out,
        } => {
            let gen = OrderLogConfig {
                seed: cfg.seed,
                investors,
                stocks,
                days,
                orders_per_day,
                coordination: (groups > 0).then_some(CoordinatedGroups {
                    groups,
                    size: group_size,
                    follow_probability,
                    max_lag_seconds,
                }),
                ..OrderLogConfig::default()
            };
            gen.check().map_err(|e| ConfigError(e.into()))?;
            single_stage(cfg, &out.out, "synth-orders", &[], |o| pipeline::synth_orders_stage(o, &gen))
        }
        SynthCommand::Layered { egos, dispersion, out } => {
            let gen = LayeredConfig::dunbar(cfg.seed, egos, dispersion);
            gen.check().map_err(|e| ConfigError(e.into()))?;
            single_stage(cfg, &out.out, "synth-layered", &[], |o| pipeline::synth_layered_stage(o, &gen))
        }
        SynthCommand::Tamarit { egos, mu, total, layers, out } => {
            let gen = TamaritSampling {
                seed: cfg.seed,
                egos,
                mu,
                total,
                layers,
                population: cfg.population.unwrap_or(10_000),
            };
            single_stage(cfg, &out.out, "synth-tamarit", &[], |o| pipeline::synth_tamarit_stage(o, &gen))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(manifest) => {
            for s in &manifest.stages {
                let status = match s.status {
                    StageStatus::Ok => "ok",
                    StageStatus::Reused => "reused",
                    StageStatus::Failed => "failed",
                };
                eprintln!("{}: {status} ({:.2}s)", s.name, s.seconds);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            // Stage failures and anything unexpected exit with 1.
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
