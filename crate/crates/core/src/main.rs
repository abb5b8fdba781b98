use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use specfilter::experiment::config::ScenarioConfig;
use specfilter::experiment::plots;
use specfilter::experiment::suite::{self, Case, Executor};
use specfilter::experiment::{default_plan, run_suite, Strategy};
use specfilter::switching::Hysteresis;

#[derive(Parser)]
#[command(name = "specfilter", version, about = "Speculative filter switching experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Benchmark,
    Cold,
    Spec,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExecutorArg {
    Lockstep,
    Concurrent,
}

impl From<ExecutorArg> for Executor {
    fn from(e: ExecutorArg) -> Self {
        match e {
            ExecutorArg::Lockstep => Executor::Lockstep,
            ExecutorArg::Concurrent => Executor::Concurrent,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one strategy and compare it with the benchmark.
    Run {
        /// JSON scenario; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
        /// Prediction horizon in samples (speculative strategy).
        #[arg(long)]
        horizon_n: Option<u32>,
        /// Samples, or `auto` for 10% of the horizon.
        #[arg(long)]
        hysteresis: Option<Hysteresis>,
        #[arg(long)]
        noise_seed: Option<u64>,
        #[arg(long, value_enum, default_value = "lockstep")]
        executor: ExecutorArg,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Adds a time column to plot data.
        #[arg(long)]
        sample_rate: Option<f64>,
    },
    /// Run the full strategy matrix.
    Suite {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "lockstep")]
        executor: ExecutorArg,
        #[arg(long)]
        sample_rate: Option<f64>,
    },
}

type Error = Box<dyn std::error::Error>;

fn load_config(path: Option<&PathBuf>) -> Result<ScenarioConfig, Error> {
    let mut cfg = match path {
        Some(p) => ScenarioConfig::load(p).map_err(|e| format!("{}: {e}", p.display()))?,
        None => ScenarioConfig::default(),
    };
    cfg.apply_seed_env()?;
    Ok(cfg)
}

#[allow(clippy::too_many_arguments)]
fn run(
    config: Option<PathBuf>,
    strategy: Option<StrategyArg>,
    horizon_n: Option<u32>,
    hysteresis: Option<Hysteresis>,
    noise_seed: Option<u64>,
    executor: Executor,
    out: PathBuf,
    sample_rate: Option<f64>,
) -> Result<(), Error> {
    let mut cfg = load_config(config.as_ref())?;
    if let Some(seed) = noise_seed {
        cfg.override_seed(seed);
    }
    if let Some(h) = hysteresis {
        cfg.hysteresis = h;
    }
    let configured_n = cfg.strategy.horizon_n().unwrap_or(30);
    cfg.strategy = match (strategy, horizon_n) {
        (Some(StrategyArg::Benchmark), _) => Strategy::Benchmark,
        (Some(StrategyArg::Cold), _) => Strategy::Cold,
        (Some(StrategyArg::Spec), n) => Strategy::Spec { n: n.unwrap_or(configured_n) },
        (None, Some(n)) => Strategy::Spec { n },
        (None, None) => cfg.strategy,
    };

    let case = Case { label: cfg.strategy.to_string(), strategy: cfg.strategy, hysteresis: cfg.hysteresis };
    let mut cases = vec![Case::new(Strategy::Benchmark, cfg.hysteresis)];
    if case.strategy != Strategy::Benchmark {
        cases.push(case);
    }
    let name = if cfg.noise.is_some() { "noisy" } else { "clean" };
    let plan = [suite::ScenarioPlan { name: name.into(), noise: cfg.noise, cases }];
    let report = run_suite(&cfg, &plan, executor)?;
    let result = report.scenarios[0].runs.last().expect("plan is not empty");

    std::fs::create_dir_all(&out)?;
    let path = out.join(format!("{}.csv", result.label));
    result.trace.write_csv(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
    let summary = report.summary();
    let table = suite::summary_table(&summary);
    std::fs::write(out.join("summary.txt"), &table)?;
    std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    plots::emit_plots(&report, &out, sample_rate)?;
    print!("{table}");
    println!("trace: {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, strategy, horizon_n, hysteresis, noise_seed, executor, out, sample_rate } => {
            run(config, strategy, horizon_n, hysteresis, noise_seed, executor.into(), out, sample_rate)
        }
        Command::Suite { config, out, executor, sample_rate } => (|| -> Result<(), Error> {
            let cfg = load_config(config.as_ref())?;
            let report = run_suite(&cfg, &default_plan(&cfg), executor.into())?;
            let written = suite::write_outputs(&report, &out, sample_rate)?;
            print!("{}", suite::summary_table(&report.summary()));
            println!("wrote {} files to {}", written.len(), out.display());
            Ok(())
        })(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("specfilter: {e}");
            ExitCode::FAILURE
        }
    }
}
