//! Output error of a strategy against the always-on benchmark.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::runtime::SampleTrace;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("trace has {trace} samples, benchmark has {benchmark}")]
    LengthMismatch { trace: usize, benchmark: usize },
    #[error("input differs from the benchmark at sample {0}")]
    InputMismatch(u64),
}

/// Percent reduction relative to cold switching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub max: f64,
    pub rms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub max_abs_error: f64,
    pub rms_error: f64,
    /// Fraction of samples with two live workers.
    pub overlap_fraction: f64,
    pub reduction_vs_cold: Option<Reduction>,
}

/// `y_strategy[n] − y_benchmark[n]`.
pub fn error_series(trace: &SampleTrace, benchmark: &SampleTrace) -> Result<Vec<f64>, MetricsError> {
    if trace.len() != benchmark.len() {
        return Err(MetricsError::LengthMismatch { trace: trace.len(), benchmark: benchmark.len() });
    }
    trace
        .records
        .iter()
        .zip(&benchmark.records)
        .map(|(a, b)| {
            if a.u.to_bits() != b.u.to_bits() {
                return Err(MetricsError::InputMismatch(a.n));
            }
            Ok(a.y_primary - b.y_primary)
        })
        .collect()
}

/// Largest magnitude and root mean square, `(0, 0)` for an empty slice.
pub fn max_and_rms(err: &[f64]) -> (f64, f64) {
    if err.is_empty() {
        return (0.0, 0.0);
    }
    let max = err.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let rms = (err.iter().map(|e| e * e).sum::<f64>() / err.len() as f64).sqrt();
    (max, rms)
}

pub fn compute_metrics(trace: &SampleTrace, benchmark: &SampleTrace) -> Result<ErrorMetrics, MetricsError> {
    compute_metrics_from(trace, benchmark, 0)
}

/// Like [`compute_metrics`] with errors before sample `skip` left out. The
/// overlap fraction always covers the whole run.
pub fn compute_metrics_from(
    trace: &SampleTrace,
    benchmark: &SampleTrace,
    skip: usize,
) -> Result<ErrorMetrics, MetricsError> {
    let err = error_series(trace, benchmark)?;
    let (max_abs_error, rms_error) = max_and_rms(&err[skip.min(err.len())..]);
    let overlap_fraction = if trace.is_empty() { 0.0 } else { trace.overlap_samples() as f64 / trace.len() as f64 };
    Ok(ErrorMetrics { max_abs_error, rms_error, overlap_fraction, reduction_vs_cold: None })
}

/// Percent reduction of `m` relative to `cold`. A zero cold error gives 0.
pub fn reduction_vs_cold(m: &ErrorMetrics, cold: &ErrorMetrics) -> Reduction {
    let pct = |x: f64, c: f64| if c > 0.0 { 100.0 * (1.0 - x / c) } else { 0.0 };
    Reduction { max: pct(m.max_abs_error, cold.max_abs_error), rms: pct(m.rms_error, cold.rms_error) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::FilterId;
    use crate::runtime::{SampleRecord, TraceMeta};
    use crate::switching::Node;
    use proptest::prelude::*;

    fn trace(y: &[f64], spec: &[bool]) -> SampleTrace {
        SampleTrace {
            meta: TraceMeta::default(),
            records: y
                .iter()
                .zip(spec)
                .enumerate()
                .map(|(n, (&y, &s))| SampleRecord {
                    n: n as u64,
                    u: n as f64,
                    load: 0.0,
                    g: 0.0,
                    node: Node::F1Only,
                    primary_id: FilterId(1),
                    y_primary: y,
                    y_spec: s.then_some(0.0),
                    cores: 2,
                    events: vec![],
                })
                .collect(),
        }
    }

    #[test]
    fn examples() {
        let bench = trace(&[0.0; 4], &[false; 4]);
        let m = compute_metrics(&trace(&[0.5; 4], &[false; 4]), &bench).unwrap();
        assert_eq!((m.max_abs_error, m.rms_error), (0.5, 0.5));
        let m = compute_metrics(&trace(&[1.0, 0.0, 0.0, 0.0], &[true, false, false, false]), &bench).unwrap();
        assert_eq!((m.max_abs_error, m.rms_error, m.overlap_fraction), (1.0, 0.5, 0.25));
        let m = compute_metrics(&bench, &bench).unwrap();
        assert_eq!((m.max_abs_error, m.rms_error), (0.0, 0.0));
    }

    #[test]
    fn mismatches_are_reported() {
        let a = trace(&[0.0; 4], &[false; 4]);
        let b = trace(&[0.0; 3], &[false; 3]);
        assert_eq!(compute_metrics(&a, &b), Err(MetricsError::LengthMismatch { trace: 4, benchmark: 3 }));
        let mut c = a.clone();
        c.records[2].u = 9.0;
        assert_eq!(compute_metrics(&c, &a), Err(MetricsError::InputMismatch(2)));
    }

    #[test]
    fn skip_drops_leading_errors() {
        let bench = trace(&[0.0; 4], &[false; 4]);
        let m = compute_metrics_from(&trace(&[3.0, 0.0, 1.0, 1.0], &[false; 4]), &bench, 2).unwrap();
        assert_eq!((m.max_abs_error, m.rms_error), (1.0, 1.0));
    }

    #[test]
    fn reduction_percentages() {
        let cold = ErrorMetrics { max_abs_error: 2.0, rms_error: 1.0, overlap_fraction: 0.0, reduction_vs_cold: None };
        let m = ErrorMetrics { max_abs_error: 0.5, rms_error: 0.1, ..cold };
        let r = reduction_vs_cold(&m, &cold);
        assert_eq!(r.max, 75.0);
        assert!((r.rms - 90.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn rms_never_exceeds_max(e in proptest::collection::vec(-1e6f64..1e6, 1..200)) {
            let (max, rms) = max_and_rms(&e);
            prop_assert!(rms <= max * (1.0 + 1e-12));
        }

        #[test]
        fn overlap_fraction_in_unit_interval(spec in proptest::collection::vec(any::<bool>(), 1..100)) {
            let y = vec![0.0; spec.len()];
            let m = compute_metrics(&trace(&y, &spec), &trace(&y, &vec![false; spec.len()])).unwrap();
            prop_assert!((0.0..=1.0).contains(&m.overlap_fraction));
        }
    }
}
