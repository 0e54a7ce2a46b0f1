use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use gazeval_cli::{
    cmd_eval, cmd_features, cmd_ingest_validate, cmd_stats, cmd_synth, error_line, EvalArgs, Overrides, RunConfig,
};
use gazeval_core::{FeatureKind, Scenario};

/// Gaze-based image pleasantness: features, evaluation and statistics.
#[derive(Parser)]
#[command(name = "gazeval", version)]
struct Cli {
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, short)]
    config: PathBuf,
    /// Root seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config file.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Image subset: s95, s296 or s382.
    #[arg(long)]
    scenario: Option<Scenario>,
}

#[derive(Subcommand)]
enum Command {
    /// Build gaze feature channels and write them as CSV.
    Features {
        #[command(flatten)]
        common: Common,
        /// Feature kinds, comma separated (default: all).
        #[arg(long, value_delimiter = ',')]
        kinds: Vec<FeatureKind>,
    },
    /// Run the cross-validation protocol on one or more channels.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Feature kind (built from the fixations) or channel CSV; repeatable.
        #[arg(long = "channel")]
        channels: Vec<String>,
        /// Visual feature channel CSV (L1 normalized before training); repeatable.
        #[arg(long)]
        visual: Vec<PathBuf>,
        /// Late-fuse all given channels into one report.
        #[arg(long)]
        fuse: bool,
        /// Observer counts for the density-map sweep, comma separated.
        #[arg(long, value_delimiter = ',')]
        sweep_observers: Option<Vec<usize>>,
        /// Observer subsets drawn per count in the sweep.
        #[arg(long, default_value_t = 5)]
        subsets: usize,
        /// 1000-dimensional classeme channel CSV.
        #[arg(long)]
        classemes: Option<PathBuf>,
        /// Protocol repetitions; overrides the config file.
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Descriptive statistics, ANOVA and Tukey-Kramer tables.
    Stats {
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic dataset with a matching config file.
    Synth {
        /// Scenario TOML (default scenario if omitted).
        #[arg(long)]
        scenario_file: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and cross-check all configured inputs.
    IngestValidate {
        #[arg(long, short)]
        config: PathBuf,
    },
}

fn load(common: &Common, jobs: Option<usize>, repetitions: Option<usize>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&common.config)?;
    cfg.apply(&Overrides {
        seed: common.seed,
        output_dir: common.output_dir.clone(),
        repetitions,
        jobs,
    });
    cfg.validate()?;
    if let Some(j) = cfg.jobs {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    Ok(cfg)
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Features { common, kinds } => {
            let cfg = load(&common, cli.jobs, None)?;
            let kinds = if kinds.is_empty() { FeatureKind::ALL.to_vec() } else { kinds };
            print_written(&cmd_features(&cfg, &kinds, common.scenario)?);
        }
        Command::Eval {
            common,
            channels,
            visual,
            fuse,
            sweep_observers,
            subsets,
            classemes,
            repetitions,
        } => {
            let cfg = load(&common, cli.jobs, repetitions)?;
            let args = EvalArgs {
                channels,
                visual,
                scenario: common.scenario,
                fuse,
                sweep_observers,
                subsets_per_n: subsets,
                classemes,
            };
            print_written(&cmd_eval(&cfg, &args)?);
        }
        Command::Stats { common } => {
            let cfg = load(&common, cli.jobs, None)?;
            print_written(&cmd_stats(&cfg, common.scenario)?);
        }
        Command::Synth { scenario_file, out, seed } => {
            print_written(&cmd_synth(scenario_file.as_deref(), &out, seed)?);
        }
        Command::IngestValidate { config } => {
            let mut cfg = RunConfig::load(&config)?;
            cfg.apply(&Overrides { jobs: cli.jobs, ..Default::default() });
            cfg.validate()?;
            print!("{}", cmd_ingest_validate(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(2)
        }
    }
}
