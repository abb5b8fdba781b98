//! The strategy matrix: benchmark, cold and speculative runs on a noiseless
//! and a noisy scenario, with metrics against the benchmark of each.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{ConfigError, NoiseConfig, ScenarioConfig, Strategy};
use super::metrics::{compute_metrics, compute_metrics_from, reduction_vs_cold, ErrorMetrics, MetricsError};
use super::plots;
use super::signals::{build_signals, PRNG_NAME};
use crate::runtime::{
    self, FilterPair, LockstepPool, RuntimeError, RuntimeStats, SampleTrace, Signals, ThreadPool, TraceMeta,
};
use crate::switching::Hysteresis;

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("scenario `{0}` has no benchmark run")]
    MissingBenchmark(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("run `{label}`: {source}")]
    Runtime { label: String, source: RuntimeError },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("writing outputs: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Executor {
    #[default]
    Lockstep,
    Concurrent,
}

impl FromStr for Executor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lockstep" => Ok(Executor::Lockstep),
            "concurrent" => Ok(Executor::Concurrent),
            _ => Err(format!("unknown executor `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub label: String,
    pub strategy: Strategy,
    pub hysteresis: Hysteresis,
}

impl Case {
    pub fn new(strategy: Strategy, hysteresis: Hysteresis) -> Self {
        Self { label: strategy.to_string(), strategy, hysteresis }
    }
}

/// One signal set and the strategies run on it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPlan {
    pub name: String,
    pub noise: Option<NoiseConfig>,
    pub cases: Vec<Case>,
}

/// Noiseless: benchmark, cold, each configured horizon and the full-run
/// horizon. Noisy: benchmark, cold and the noisy horizon with and without
/// hysteresis.
pub fn default_plan(cfg: &ScenarioConfig) -> Vec<ScenarioPlan> {
    let mut horizons: Vec<u32> = cfg.suite.horizons.iter().copied().filter(|&n| n > 0).collect();
    horizons.push(cfg.length as u32);
    horizons.sort_unstable();
    horizons.dedup();

    let mut clean = vec![Case::new(Strategy::Benchmark, cfg.hysteresis), Case::new(Strategy::Cold, cfg.hysteresis)];
    clean.extend(horizons.into_iter().map(|n| Case::new(Strategy::Spec { n }, cfg.hysteresis)));
    let mut plan = vec![ScenarioPlan { name: "clean".into(), noise: cfg.noise, cases: clean }];

    if let Some(noise) = cfg.suite.noisy {
        let n = cfg.suite.noisy_horizon;
        let spec = Strategy::Spec { n };
        plan.push(ScenarioPlan {
            name: "noisy".into(),
            noise: Some(noise),
            cases: vec![
                Case::new(Strategy::Benchmark, cfg.hysteresis),
                Case::new(Strategy::Cold, cfg.hysteresis),
                Case { label: format!("{spec}-nohyst"), strategy: spec, hysteresis: Hysteresis::Samples(0) },
                Case { label: format!("{spec}-hyst"), strategy: spec, hysteresis: Hysteresis::Auto },
            ],
        });
    }
    plan
}

/// Run one strategy over prepared signals.
pub fn run_case(
    filters: &FilterPair,
    signals: &Signals,
    case: &Case,
    length: usize,
    executor: Executor,
) -> Result<(SampleTrace, RuntimeStats), RuntimeError> {
    let predictor = case.strategy.predictor(case.hysteresis, length);
    match executor {
        Executor::Lockstep => runtime::execute(LockstepPool::default(), filters, signals, &predictor, length),
        Executor::Concurrent => runtime::execute(ThreadPool::default(), filters, signals, &predictor, length),
    }
}

pub fn trace_meta(scenario: &str, label: &str, noise: Option<&NoiseConfig>) -> TraceMeta {
    TraceMeta {
        label: Some(format!("{scenario}/{label}")),
        prng: noise.map(|_| PRNG_NAME.to_string()),
        seed: noise.map(|n| n.seed),
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub label: String,
    pub strategy: Strategy,
    /// Resolved hysteresis in samples.
    pub hysteresis: u32,
    pub trace: SampleTrace,
    pub stats: RuntimeStats,
    /// Over the whole run; the reduction is computed on the window after the
    /// startup skip.
    pub metrics: ErrorMetrics,
    pub respawns: usize,
}

#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub name: String,
    pub noise: Option<NoiseConfig>,
    pub runs: Vec<RunReport>,
}

impl ScenarioReport {
    pub fn run(&self, label: &str) -> Option<&RunReport> {
        self.runs.iter().find(|r| r.label == label)
    }

    pub fn benchmark(&self) -> &RunReport {
        self.runs.iter().find(|r| r.strategy == Strategy::Benchmark).expect("checked when the suite ran")
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub scenarios: Vec<ScenarioReport>,
    pub max_time_constant: f64,
    /// Leading samples left out of the reduction percentages.
    pub skip: usize,
}

impl SuiteReport {
    pub fn scenario(&self, name: &str) -> Option<&ScenarioReport> {
        self.scenarios.iter().find(|s| s.name == name)
    }

    pub fn leaked_workers(&self) -> usize {
        self.scenarios.iter().flat_map(|s| &s.runs).map(|r| r.stats.leaked).sum()
    }
}

pub fn run_suite(cfg: &ScenarioConfig, plan: &[ScenarioPlan], executor: Executor) -> Result<SuiteReport, SuiteError> {
    for p in plan {
        if !p.cases.iter().any(|c| c.strategy == Strategy::Benchmark) {
            return Err(SuiteError::MissingBenchmark(p.name.clone()));
        }
    }
    let filters = cfg.build_filters()?;
    let max_time_constant = cfg.max_time_constant()?;
    let skip = (5.0 * max_time_constant).ceil() as usize;

    let mut scenarios = Vec::new();
    for p in plan {
        let signals = build_signals(cfg, p.noise.as_ref());
        let mut runs = Vec::new();
        for case in &p.cases {
            log::info!("{}: running {}", p.name, case.label);
            let (mut trace, stats) = run_case(&filters, &signals, case, cfg.length, executor)
                .map_err(|source| SuiteError::Runtime { label: format!("{}/{}", p.name, case.label), source })?;
            trace.meta = trace_meta(&p.name, &case.label, p.noise.as_ref());
            let respawns = trace.respawns();
            let hysteresis = case.strategy.predictor(case.hysteresis, cfg.length).hysteresis;
            runs.push(RunReport {
                label: case.label.clone(),
                strategy: case.strategy,
                hysteresis,
                trace,
                stats,
                metrics: ErrorMetrics {
                    max_abs_error: 0.0,
                    rms_error: 0.0,
                    overlap_fraction: 0.0,
                    reduction_vs_cold: None,
                },
                respawns,
            });
        }

        let bench = runs.iter().position(|r| r.strategy == Strategy::Benchmark).expect("checked above");
        let bench_trace = runs[bench].trace.clone();
        let cold_window = match runs.iter().find(|r| r.strategy == Strategy::Cold) {
            Some(r) => Some(compute_metrics_from(&r.trace, &bench_trace, skip)?),
            None => None,
        };
        for r in &mut runs {
            r.metrics = compute_metrics(&r.trace, &bench_trace)?;
            if let Some(cold) = &cold_window {
                let window = compute_metrics_from(&r.trace, &bench_trace, skip)?;
                r.metrics.reduction_vs_cold = Some(reduction_vs_cold(&window, cold));
            }
        }
        scenarios.push(ScenarioReport { name: p.name.clone(), noise: p.noise, runs });
    }
    Ok(SuiteReport { scenarios, max_time_constant, skip })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub label: String,
    pub strategy: Strategy,
    pub hysteresis: u32,
    pub metrics: ErrorMetrics,
    pub respawns: usize,
    pub switches: usize,
    pub leaked_workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub max_time_constant: f64,
    pub reduction_skip: usize,
    pub runs: Vec<SummaryRow>,
}

impl SuiteReport {
    pub fn summary(&self) -> Summary {
        let runs = self
            .scenarios
            .iter()
            .flat_map(|s| {
                s.runs.iter().map(|r| SummaryRow {
                    scenario: s.name.clone(),
                    label: r.label.clone(),
                    strategy: r.strategy,
                    hysteresis: r.hysteresis,
                    metrics: r.metrics,
                    respawns: r.respawns,
                    switches: r.trace.switch_instants().len(),
                    leaked_workers: r.stats.leaked,
                })
            })
            .collect();
        Summary { max_time_constant: self.max_time_constant, reduction_skip: self.skip, runs }
    }
}

/// Aligned plain-text table.
pub fn summary_table(summary: &Summary) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<8} {:<16} {:>4} {:>13} {:>13} {:>8} {:>9} {:>9} {:>8} {:>8}",
        "scenario", "run", "hyst", "max_abs_err", "rms_err", "overlap", "max_red%", "rms_red%", "respawns", "switches"
    );
    for r in &summary.runs {
        let (rmax, rrms) = match r.metrics.reduction_vs_cold {
            Some(red) => (format!("{:.2}", red.max), format!("{:.2}", red.rms)),
            None => ("-".into(), "-".into()),
        };
        let _ = writeln!(
            out,
            "{:<8} {:<16} {:>4} {:>13.6e} {:>13.6e} {:>8.4} {:>9} {:>9} {:>8} {:>8}",
            r.scenario,
            r.label,
            r.hysteresis,
            r.metrics.max_abs_error,
            r.metrics.rms_error,
            r.metrics.overlap_fraction,
            rmax,
            rrms,
            r.respawns,
            r.switches
        );
    }
    let _ = writeln!(
        out,
        "\nreductions vs cold skip the first {} samples (5 x tau_max = {:.2})",
        summary.reduction_skip, summary.max_time_constant
    );
    out
}

/// Write one CSV per run, `summary.txt`, `summary.json` and the plot data.
pub fn write_outputs(report: &SuiteReport, dir: &Path, sample_rate: Option<f64>) -> Result<Vec<PathBuf>, SuiteError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for s in &report.scenarios {
        for r in &s.runs {
            let path = dir.join(format!("{}_{}.csv", s.name, r.label));
            r.trace.write_csv(std::io::BufWriter::new(fs::File::create(&path)?))?;
            written.push(path);
        }
    }
    let summary = report.summary();
    let txt = dir.join("summary.txt");
    fs::write(&txt, summary_table(&summary))?;
    let json = dir.join("summary.json");
    fs::write(&json, serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n")?;
    written.extend([txt, json]);
    written.extend(plots::emit_plots(report, dir, sample_rate)?);
    Ok(written)
}
