//! Single-section IIR filters: coefficients, delay-line state and the
//! per-sample recursion.

mod design;
mod roots;

pub use design::design_cheby1_lowpass;
pub use roots::{poly_eval, poly_roots};

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Small integer label identifying one filter configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FilterId(pub u8);

impl fmt::Display for FilterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("denominator must be non-empty with a non-zero leading coefficient")]
    ZeroLeadingDenominator,
    #[error("coefficient sequences must be non-empty and finite")]
    InvalidCoefficients,
    #[error("unstable filter: max pole magnitude {max_pole_magnitude}")]
    UnstableFilter { max_pole_magnitude: f64 },
    #[error("state belongs to filter {state} but was stepped with filter {filter}")]
    StateOwnershipMismatch { filter: FilterId, state: FilterId },
    #[error("invalid design parameters: {0}")]
    InvalidDesignParameters(String),
    #[error("filter {0} has no dynamics (order 0)")]
    ZeroOrderFilter(FilterId),
}

/// Immutable IIR coefficient set. `a[0]` is normalized to exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitalFilter {
    id: FilterId,
    b: Vec<f64>,
    a: Vec<f64>,
    order: usize,
    max_pole: f64,
}

impl DigitalFilter {
    /// Normalizes by `a[0]` and rejects filters with any pole on or outside
    /// the unit circle.
    pub fn new(id: FilterId, b: &[f64], a: &[f64]) -> Result<Self, FilterError> {
        let a0 = *a.first().ok_or(FilterError::ZeroLeadingDenominator)?;
        if a0 == 0.0 {
            return Err(FilterError::ZeroLeadingDenominator);
        }
        if b.is_empty() || b.iter().chain(a).any(|c| !c.is_finite()) {
            return Err(FilterError::InvalidCoefficients);
        }
        let b: Vec<f64> = b.iter().map(|c| c / a0).collect();
        let mut a: Vec<f64> = a.iter().map(|c| c / a0).collect();
        a[0] = 1.0;
        let order = b.len().max(a.len()) - 1;

        let max_pole = roots::poly_roots(&a).iter().map(|p| p.norm()).fold(0.0, f64::max);
        if max_pole >= 1.0 {
            return Err(FilterError::UnstableFilter { max_pole_magnitude: max_pole });
        }
        Ok(Self { id, b, a, order, max_pole })
    }

    pub fn id(&self) -> FilterId {
        self.id
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Roots of the denominator polynomial.
    pub fn poles(&self) -> Vec<Complex64> {
        roots::poly_roots(&self.a)
    }

    pub fn max_pole_magnitude(&self) -> f64 {
        self.max_pole
    }

    /// Frequency response at `omega` radians/sample.
    pub fn response(&self, omega: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -omega);
        let horner = |c: &[f64]| c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &k| acc * z_inv + k);
        horner(&self.b) / horner(&self.a)
    }

    /// Zero-initialized delay line owned by this filter.
    pub fn new_state(&self) -> FilterState {
        FilterState { w: vec![0.0; self.order], owner: self.id }
    }

    /// Dominant-pole time constant in samples, `-1 / ln(rho)`.
    pub fn time_constant_samples(&self) -> Result<f64, FilterError> {
        if self.order == 0 {
            return Err(FilterError::ZeroOrderFilter(self.id));
        }
        Ok(-1.0 / self.max_pole.ln())
    }

    /// Advance `state` by one input sample (Direct Form II transposed).
    pub fn step(&self, state: &mut FilterState, u: f64) -> Result<f64, FilterError> {
        if state.owner != self.id {
            return Err(FilterError::StateOwnershipMismatch { filter: self.id, state: state.owner });
        }
        Ok(self.step_unchecked(&mut state.w, u))
    }

    fn step_unchecked(&self, w: &mut [f64], u: f64) -> f64 {
        let coef = |c: &[f64], k: usize| c.get(k).copied().unwrap_or(0.0);
        let y = coef(&self.b, 0) * u + w.first().copied().unwrap_or(0.0);
        let n = w.len();
        for k in 0..n {
            let next = if k + 1 < n { w[k + 1] } else { 0.0 };
            w[k] = next + coef(&self.b, k + 1) * u - coef(&self.a, k + 1) * y;
        }
        y
    }
}

/// Delay line of one filter instance. Length always equals the owner's order.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    w: Vec<f64>,
    owner: FilterId,
}

impl FilterState {
    pub fn owner(&self) -> FilterId {
        self.owner
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    /// Overwrite the delay line, e.g. to start from a non-zero initial
    /// condition. Length must match.
    pub fn set_values(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.w.len(), "delay line length is fixed by the filter order");
        self.w.copy_from_slice(values);
    }

    /// Cold initial conditions.
    pub fn reset(&mut self) {
        self.w.iter_mut().for_each(|v| *v = 0.0);
    }
}
