//! Scenario configuration, read from JSON.
//!
//! ```json
//! {
//!   "length": 1000,
//!   "threshold": 0.5,
//!   "load": { "kind": "sinusoid", "periods": 1.0 },
//!   "input": { "kind": "sinusoid", "cycles": 25.0, "amplitude": 1.0 },
//!   "noise": { "mean": 0.1, "stddev": 0.5, "seed": 42 },
//!   "filters": [
//!     { "id": 1, "design": { "type": "cheby1_lowpass", "order": 3, "ripple_db": 1.0, "cutoff": 0.043 } },
//!     { "id": 2, "b": [0.1, 0.2], "a": [1.0, -0.7] }
//!   ],
//!   "strategy": { "kind": "spec", "n": 30 },
//!   "hysteresis": "auto",
//!   "suite": { "horizons": [10, 30, 100], "noisy": { "mean": 0.1, "stddev": 0.5, "seed": 42 }, "noisy_horizon": 30 }
//! }
//! ```
//!
//! Every field is optional.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::{design_cheby1_lowpass, DigitalFilter, FilterError, FilterId};
use crate::runtime::FilterPair;
use crate::switching::{Hysteresis, PredictorConfig};

pub const SEED_ENV: &str = "SPECFILTER_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    #[default]
    Sinusoid,
}

/// Load profile `½(1 + sin(2π·periods·n/length))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadConfig {
    pub kind: SignalKind,
    pub periods: f64,
}

impl Default for LoadConfig {
    fn default() -> Self {
        Self { kind: SignalKind::Sinusoid, periods: 1.0 }
    }
}

/// Filter input `amplitude·sin(2π·cycles·n/length)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub kind: SignalKind,
    pub cycles: f64,
    pub amplitude: f64,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self { kind: SignalKind::Sinusoid, cycles: 25.0, amplitude: 1.0 }
    }
}

/// Gaussian noise added to the load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub mean: f64,
    pub stddev: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { mean: 0.1, stddev: 0.5, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignSpec {
    Cheby1Lowpass { order: usize, ripple_db: f64, cutoff: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FilterSpec {
    Coefficients { id: u8, b: Vec<f64>, a: Vec<f64> },
    Designed { id: u8, design: DesignSpec },
}

impl FilterSpec {
    pub fn build(&self) -> Result<DigitalFilter, FilterError> {
        match self {
            FilterSpec::Coefficients { id, b, a } => DigitalFilter::new(FilterId(*id), b, a),
            FilterSpec::Designed { id, design: DesignSpec::Cheby1Lowpass { order, ripple_db, cutoff } } => {
                design_cheby1_lowpass(FilterId(*id), *order, *ripple_db, *cutoff)
            }
        }
    }
}

/// High-order filter (runs while load is below threshold) and its cheaper
/// fallback. Both settle in about 30 samples.
pub fn default_filters() -> [FilterSpec; 2] {
    [
        FilterSpec::Designed { id: 1, design: DesignSpec::Cheby1Lowpass { order: 3, ripple_db: 1.0, cutoff: 0.043 } },
        FilterSpec::Designed { id: 2, design: DesignSpec::Cheby1Lowpass { order: 2, ripple_db: 1.0, cutoff: 0.0195 } },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Strategy {
    /// Both filters always on, outputs multiplexed. The error reference.
    Benchmark,
    Cold,
    Spec {
        n: u32,
    },
}

impl Strategy {
    pub fn horizon_n(self) -> Option<u32> {
        match self {
            Strategy::Spec { n } => Some(n),
            _ => None,
        }
    }

    pub fn predictor(self, hysteresis: Hysteresis, length: usize) -> PredictorConfig {
        match self {
            Strategy::Benchmark => PredictorConfig::always_on(),
            Strategy::Cold => PredictorConfig::cold(),
            Strategy::Spec { n } => PredictorConfig::for_run(n, hysteresis, length as u64),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Benchmark => f.write_str("benchmark"),
            Strategy::Cold => f.write_str("cold"),
            Strategy::Spec { n } => write!(f, "spec{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    /// Horizons of the noiseless speculative runs. A run with `n = length`
    /// is always added.
    pub horizons: Vec<u32>,
    pub noisy: Option<NoiseConfig>,
    pub noisy_horizon: u32,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { horizons: vec![10, 30, 100], noisy: Some(NoiseConfig::default()), noisy_horizon: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub length: usize,
    pub threshold: f64,
    pub load: LoadConfig,
    pub input: InputConfig,
    pub noise: Option<NoiseConfig>,
    pub filters: [FilterSpec; 2],
    pub strategy: Strategy,
    pub hysteresis: Hysteresis,
    pub suite: SuiteConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            length: 1000,
            threshold: 0.5,
            load: LoadConfig::default(),
            input: InputConfig::default(),
            noise: None,
            filters: default_filters(),
            strategy: Strategy::Spec { n: 30 },
            hysteresis: Hysteresis::Auto,
            suite: SuiteConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn build_filters(&self) -> Result<FilterPair, ConfigError> {
        let pair = [self.filters[0].build()?, self.filters[1].build()?];
        if pair[0].id() == pair[1].id() {
            return Err(ConfigError::Invalid(format!("both filters have id {}", pair[0].id())));
        }
        Ok(pair)
    }

    /// Slowest dominant time constant of the pair, in samples.
    pub fn max_time_constant(&self) -> Result<f64, ConfigError> {
        let pair = self.build_filters()?;
        let mut tau: f64 = 0.0;
        for f in &pair {
            tau = tau.max(f.time_constant_samples()?);
        }
        Ok(tau)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(ConfigError::Invalid(format!("threshold {} not in (0, 1)", self.threshold)));
        }
        for (name, v) in [
            ("load.periods", self.load.periods),
            ("input.cycles", self.input.cycles),
            ("input.amplitude", self.input.amplitude),
        ] {
            if !v.is_finite() {
                return Err(ConfigError::Invalid(format!("{name} must be finite")));
            }
        }
        for noise in self.noise.iter().chain(self.suite.noisy.iter()) {
            if !(noise.stddev >= 0.0 && noise.stddev.is_finite() && noise.mean.is_finite()) {
                return Err(ConfigError::Invalid(format!("noise mean {} stddev {}", noise.mean, noise.stddev)));
            }
        }
        let tau = self.max_time_constant()?;
        if (self.length as f64) < 10.0 * tau {
            return Err(ConfigError::Invalid(format!(
                "length {} is shorter than 10 time constants ({:.1} samples)",
                self.length,
                10.0 * tau
            )));
        }
        Ok(())
    }

    /// Replace every noise seed.
    pub fn override_seed(&mut self, seed: u64) {
        for noise in self.noise.iter_mut().chain(self.suite.noisy.iter_mut()) {
            noise.seed = seed;
        }
    }

    /// Apply `SPECFILTER_SEED` if set.
    pub fn apply_seed_env(&mut self) -> Result<(), ConfigError> {
        match std::env::var(SEED_ENV) {
            Ok(v) => {
                let seed =
                    v.trim().parse().map_err(|_| ConfigError::Invalid(format!("{SEED_ENV}={v} is not a u64")))?;
                self.override_seed(seed);
                Ok(())
            }
            Err(_) => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        assert_eq!(ScenarioConfig::from_json("{}").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn json_round_trip() {
        let cfg = ScenarioConfig {
            noise: Some(NoiseConfig { mean: 0.0, stddev: 0.25, seed: 9 }),
            hysteresis: Hysteresis::Samples(4),
            strategy: Strategy::Cold,
            ..Default::default()
        };
        assert_eq!(ScenarioConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn parses_both_filter_forms() {
        let cfg = ScenarioConfig::from_json(
            r#"{"filters": [
                {"id": 1, "design": {"type": "cheby1_lowpass", "order": 3, "ripple_db": 1.0, "cutoff": 0.043}},
                {"id": 2, "b": [0.05], "a": [1.0, -0.95]}
            ], "strategy": {"kind": "spec", "n": 12}, "hysteresis": 3}"#,
        )
        .unwrap();
        let pair = cfg.build_filters().unwrap();
        assert_eq!(pair[1].a(), &[1.0, -0.95]);
        assert_eq!(cfg.strategy, Strategy::Spec { n: 12 });
        assert_eq!(cfg.hysteresis, Hysteresis::Samples(3));
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            r#"{"threshold": 1.0}"#,
            r#"{"threshold": 0.0}"#,
            r#"{"length": 100}"#,
            r#"{"bogus": 1}"#,
            r#"{"filters": [{"id": 1, "b": [1], "a": [1, -1.5]}, {"id": 2, "b": [1], "a": [1]}]}"#,
            r#"{"filters": [{"id": 1, "b": [1], "a": [1, -0.5]}, {"id": 1, "b": [1], "a": [1, -0.5]}]}"#,
            r#"{"noise": {"mean": 0.0, "stddev": -1.0, "seed": 1}}"#,
        ] {
            assert!(ScenarioConfig::from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn seed_override_reaches_every_noise_source() {
        let mut cfg = ScenarioConfig { noise: Some(NoiseConfig::default()), ..Default::default() };
        cfg.override_seed(77);
        assert_eq!(cfg.noise.unwrap().seed, 77);
        assert_eq!(cfg.suite.noisy.unwrap().seed, 77);
    }

    #[test]
    fn default_pair_fits_default_length() {
        let tau = ScenarioConfig::default().max_time_constant().unwrap();
        assert!(tau > 29.0 && tau < 31.0);
    }
}
