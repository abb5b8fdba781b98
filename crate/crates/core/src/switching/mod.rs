//! Switching function handling: which filter is selected, linear
//! extrapolation of the switching function, and the crossing predictor.

mod supervisor;

pub use supervisor::{supervise, CommandKind, LifecycleCommand, Node, SupervisorState};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::DigitalFilter;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SwitchError {
    #[error("prediction needs two samples of switching-function history, have {0}")]
    InsufficientHistory(u64),
    #[error("prediction horizon must be at least 1")]
    ZeroHorizon,
}

/// The two filter configurations. `F1` runs while the switching function is
/// positive, `F2` while it is negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Slot {
    F1,
    F2,
}

impl Slot {
    pub fn other(self) -> Slot {
        match self {
            Slot::F1 => Slot::F2,
            Slot::F2 => Slot::F1,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Slot::F1 => 0,
            Slot::F2 => 1,
        }
    }
}

/// Piecewise selection rule. Exactly zero holds the current filter.
pub fn select_active(g_now: f64, current: Slot) -> Slot {
    if g_now > 0.0 {
        Slot::F1
    } else if g_now < 0.0 {
        Slot::F2
    } else {
        current
    }
}

/// Filter selected by the first non-zero switching-function sample, `F1` if
/// the signal is identically zero.
pub fn initial_slot(g: &[f64]) -> Slot {
    g.iter().find(|v| **v != 0.0).map(|&v| select_active(v, Slot::F1)).unwrap_or(Slot::F1)
}

/// Two-sample window over the switching function.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SwitchSignal {
    g_now: f64,
    g_prev: f64,
    seen: u64,
}

impl SwitchSignal {
    pub fn new() -> Self {
        Self::default()
    }

    /// Window positioned at sample `n` (at least 1) with explicit history.
    pub fn with_history(g_prev: f64, g_now: f64, n: u64) -> Self {
        Self { g_now, g_prev, seen: n.max(1) + 1 }
    }

    /// Advance by one sample.
    pub fn push(&mut self, g: f64) {
        self.g_prev = self.g_now;
        self.g_now = g;
        self.seen += 1;
    }

    pub fn g_now(&self) -> f64 {
        self.g_now
    }

    /// `None` until two samples have been seen.
    pub fn g_prev(&self) -> Option<f64> {
        (self.seen >= 2).then_some(self.g_prev)
    }

    /// Index of the current sample. Zero before the first push as well.
    pub fn n(&self) -> u64 {
        self.seen.saturating_sub(1)
    }

    fn slope(&self) -> Result<(f64, f64), SwitchError> {
        match self.g_prev() {
            Some(prev) => Ok((self.g_now, prev)),
            None => Err(SwitchError::InsufficientHistory(self.seen)),
        }
    }
}

/// Linear extrapolation of the switching function `m` samples ahead using
/// the last finite difference.
pub fn extrapolate(sig: &SwitchSignal, m: u32) -> Result<f64, SwitchError> {
    if m == 0 {
        return Err(SwitchError::ZeroHorizon);
    }
    let (now, prev) = sig.slope()?;
    Ok(now + (now - prev) * m as f64)
}

/// True when the extrapolated switching function crosses into the other
/// filter's region within `horizon` samples. Evaluated in the multiplied-out
/// form `g[n](N+1) > g[n-1] N` (running `F2`) or its mirror (running `F1`).
pub fn predict_cross(sig: &SwitchSignal, horizon: u32, running: Slot) -> Result<bool, SwitchError> {
    if horizon == 0 {
        return Err(SwitchError::ZeroHorizon);
    }
    let (now, prev) = sig.slope()?;
    let n = horizon as f64;
    Ok(match running {
        Slot::F2 => now * (n + 1.0) > prev * n,
        Slot::F1 => now * (n + 1.0) < prev * n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    /// No prediction: every switch is cold.
    Disabled,
    Samples(u32),
    /// Horizon spans the whole run. The standby filter is treated as always
    /// needed, so it is started at the first sample and never retired.
    Saturated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hysteresis {
    /// 10% of the horizon, rounded half up, at least one sample.
    Auto,
    #[serde(untagged)]
    Samples(u32),
}

impl Hysteresis {
    pub fn resolve(self, horizon_n: u32) -> u32 {
        match self {
            Hysteresis::Samples(h) => h,
            Hysteresis::Auto if horizon_n == 0 => 0,
            Hysteresis::Auto => ((horizon_n as u64 + 5) / 10).max(1) as u32,
        }
    }
}

impl std::str::FromStr for Hysteresis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Hysteresis::Auto);
        }
        s.parse::<u32>().map(Hysteresis::Samples).map_err(|_| format!("expected `auto` or a sample count, got `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredictorConfig {
    pub horizon: Horizon,
    /// Samples a deactivated worker is kept alive.
    pub hysteresis: u32,
}

impl PredictorConfig {
    /// Horizon `n` for a run of `run_length` samples. `0` disables
    /// prediction; `n >= run_length` saturates.
    pub fn for_run(horizon_n: u32, hysteresis: Hysteresis, run_length: u64) -> Self {
        let horizon = match horizon_n {
            0 => Horizon::Disabled,
            n if n as u64 >= run_length => Horizon::Saturated,
            n => Horizon::Samples(n),
        };
        Self { horizon, hysteresis: hysteresis.resolve(horizon_n) }
    }

    pub fn cold() -> Self {
        Self { horizon: Horizon::Disabled, hysteresis: 0 }
    }

    /// Both filters always running, outputs multiplexed.
    pub fn always_on() -> Self {
        Self { horizon: Horizon::Saturated, hysteresis: 0 }
    }

    /// Whether the predictor calls for the standby filter at this sample.
    /// Insufficient history reads as "no prediction".
    pub fn predicts(&self, sig: &SwitchSignal, running: Slot) -> bool {
        match self.horizon {
            Horizon::Disabled => false,
            Horizon::Saturated => true,
            Horizon::Samples(n) => predict_cross(sig, n, running).unwrap_or(false),
        }
    }
}

/// Horizon of `multiple` dominant time constants of the slower filter,
/// rounded up. One to three time constants is the usual range.
pub fn suggest_horizon(filters: &[&DigitalFilter], multiple: f64) -> Option<u32> {
    let tau = filters
        .iter()
        .filter_map(|f| f.time_constant_samples().ok())
        .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.max(t))))?;
    Some((multiple * tau).ceil().max(1.0) as u32)
}
