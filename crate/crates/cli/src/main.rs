use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rdrrt::data::{ColumnMap, DEFAULT_BANDWIDTHS, DEFAULT_THRESHOLD};
use rdrrt::explore::ExploreOptions;
use rdrrt::freq::DEFAULT_BOOTSTRAP;
use rdrrt::mcmc::SamplerConfig;
use rdrrt::sim::{EstimatorSpec, Scenario, ScenarioSpec};
use rdrrt_cli::*;

#[derive(Parser)]
#[command(
    name = "rdrrt",
    version,
    about = "Risk ratio for the treated in fuzzy regression discontinuity designs"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Binned means and per-side smoothing splines around the threshold.
    Explore {
        #[command(flatten)]
        data: DataArgs,
        /// Lower end of the displayed risk-score range.
        #[arg(long, default_value_t = 0.1)]
        lower: f64,
        /// Upper end of the displayed risk-score range.
        #[arg(long, default_value_t = 0.3)]
        upper: f64,
        #[arg(long, default_value_t = rdrrt::explore::DEFAULT_BINS)]
        bins: usize,
        /// Spline smoothing parameter (default: chosen by GCV).
        #[arg(long)]
        stiffness: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// RRT estimates per bandwidth and estimator.
    Estimate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        est: EstimatorArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Repeated-sampling study over the simulation scenarios.
    Simulate {
        /// Scenarios as strength/confounding/effect, comma separated
        /// (default: all twelve).
        #[arg(long, value_delimiter = ',', conflicts_with = "config")]
        scenarios: Vec<String>,
        /// JSON file with a list of scenario specifications.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Records per simulated dataset.
        #[arg(long, default_value_t = 10_000, conflicts_with = "config")]
        n: usize,
        #[arg(long, default_value_t = 100, conflicts_with = "config")]
        replications: usize,
        #[arg(long, value_delimiter = ',', conflicts_with = "config")]
        bandwidths: Vec<f64>,
        #[command(flatten)]
        est: EstimatorArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// First-stage F-test, Balke-Pearl bounds and cell counts per bandwidth.
    Diagnose {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Comma-separated input with a header row.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Comma-separated bandwidths (explore ignores them).
    #[arg(long, value_delimiter = ',')]
    bandwidths: Vec<f64>,
    #[arg(long, default_value = "x")]
    x_col: String,
    #[arg(long, default_value = "t")]
    t_col: String,
    #[arg(long, default_value = "y")]
    y_col: String,
}

#[derive(Args)]
struct EstimatorArgs {
    /// Estimators: pois.pois, pois.flex, pois.prod.flex (optionally `+c`), gmm.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "pois.flex,pois.pois,pois.prod.flex,gmm"
    )]
    models: Vec<String>,
    /// Use the constrained variant of every Bayesian model.
    #[arg(long)]
    constrained: bool,
    #[arg(long, default_value_t = 2)]
    chains: usize,
    #[arg(long, default_value_t = 10_000)]
    burnin: usize,
    #[arg(long, default_value_t = 50_000)]
    iters: usize,
    #[arg(long, default_value_t = 1_000)]
    retain: usize,
    /// Keep every n-th post-burn-in draw.
    #[arg(long, default_value_t = 50)]
    thin: usize,
    /// Bootstrap replicates for the GMM interval.
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP)]
    bootstrap: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct OutputArgs {
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

fn base_config(command: Command, format: Format) -> RunConfig {
    RunConfig {
        command,
        input: None,
        columns: ColumnMap::default(),
        threshold: DEFAULT_THRESHOLD,
        bandwidths: Vec::new(),
        estimators: Vec::new(),
        sampler: SamplerConfig::default(),
        bootstrap: DEFAULT_BOOTSTRAP,
        seed: 0,
        format,
        explore: None,
        scenarios: Vec::new(),
    }
}

fn apply_data(cfg: &mut RunConfig, d: DataArgs) {
    cfg.input = Some(d.input);
    cfg.threshold = d.threshold;
    cfg.columns = ColumnMap {
        x: d.x_col,
        t: d.t_col,
        y: d.y_col,
    };
    cfg.bandwidths = if d.bandwidths.is_empty() {
        DEFAULT_BANDWIDTHS.to_vec()
    } else {
        d.bandwidths
    };
}

fn apply_estimators(cfg: &mut RunConfig, e: EstimatorArgs) -> Result<(), RunError> {
    cfg.sampler = SamplerConfig {
        chains: e.chains,
        burn_in: e.burnin,
        iterations: e.iters,
        retain: e.retain,
        thin: e.thin,
        seed: e.seed,
        ..SamplerConfig::default()
    };
    cfg.sampler.validate()?;
    cfg.bootstrap = e.bootstrap;
    cfg.seed = e.seed;
    cfg.estimators = e
        .models
        .iter()
        .map(|m| EstimatorSpec::parse(m.trim(), e.constrained, e.bootstrap))
        .collect::<rdrrt::Result<_>>()?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, RunError> {
    let (text, out, failed) = match cli.command {
        Cmd::Explore {
            data,
            lower,
            upper,
            bins,
            stiffness,
            output,
        } => {
            let mut cfg = base_config(Command::Explore, output.format);
            let threshold = data.threshold;
            apply_data(&mut cfg, data);
            cfg.bandwidths.clear();
            cfg.explore = Some(ExploreOptions {
                lower,
                upper,
                threshold,
                bins,
                stiffness,
                ..ExploreOptions::default()
            });
            let doc = explore_command(&cfg)?;
            (render(&doc, output.format)?, output.out, false)
        }
        Cmd::Estimate { data, est, output } => {
            let mut cfg = base_config(Command::Estimate, output.format);
            apply_data(&mut cfg, data);
            apply_estimators(&mut cfg, est)?;
            let doc = estimate_command(&cfg)?;
            (
                render(&doc, output.format)?,
                output.out,
                has_failed_cells(&doc),
            )
        }
        Cmd::Diagnose { data, output } => {
            let mut cfg = base_config(Command::Diagnose, output.format);
            apply_data(&mut cfg, data);
            let doc = diagnose_command(&cfg)?;
            let failed = doc
                .diagnostics
                .bandwidths
                .iter()
                .any(|b| b.status.starts_with("failed"));
            (render(&doc, output.format)?, output.out, failed)
        }
        Cmd::Simulate {
            scenarios,
            config,
            n,
            replications,
            bandwidths,
            est,
            output,
        } => {
            let mut cfg = base_config(Command::Simulate, output.format);
            apply_estimators(&mut cfg, est)?;
            cfg.scenarios = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| {
                        RunError::Input(format!("cannot read {}: {e}", path.display()))
                    })?;
                    serde_json::from_str::<Vec<ScenarioSpec>>(&text)
                        .map_err(|e| RunError::Input(format!("{}: {e}", path.display())))?
                }
                None => {
                    let list: Vec<Scenario> = if scenarios.is_empty() {
                        Scenario::all()
                    } else {
                        scenarios
                            .iter()
                            .map(|s| s.trim().parse())
                            .collect::<rdrrt::Result<_>>()?
                    };
                    list.into_iter()
                        .map(|sc| ScenarioSpec {
                            n,
                            replications,
                            seed: cfg.seed,
                            bandwidths: if bandwidths.is_empty() {
                                DEFAULT_BANDWIDTHS.to_vec()
                            } else {
                                bandwidths.clone()
                            },
                            ..ScenarioSpec::new(sc)
                        })
                        .collect()
                }
            };
            for s in &cfg.scenarios {
                s.validate()?;
            }
            let doc = simulate_command(&cfg)?;
            (render(&doc, output.format)?, output.out, false)
        }
    };
    emit(&text, out.as_ref())?;
    Ok(if failed {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
