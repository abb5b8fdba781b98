//! Chebyshev Type-I lowpass design via the bilinear transform.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::roots::poly_from_roots;
use super::{DigitalFilter, FilterError, FilterId};

/// Design an `order`-pole Chebyshev Type-I lowpass with `ripple_db` of
/// passband ripple. `cutoff` is the passband edge as a fraction of Nyquist;
/// the magnitude there is exactly `10^(-ripple_db/20)`.
pub fn design_cheby1_lowpass(
    id: FilterId,
    order: usize,
    ripple_db: f64,
    cutoff: f64,
) -> Result<DigitalFilter, FilterError> {
    if !(1..=8).contains(&order) {
        return Err(FilterError::InvalidDesignParameters(format!("order {order} not in 1..=8")));
    }
    if !(ripple_db > 0.0 && ripple_db.is_finite()) {
        return Err(FilterError::InvalidDesignParameters(format!("ripple {ripple_db} dB must be positive")));
    }
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(FilterError::InvalidDesignParameters(format!("cutoff {cutoff} not in (0, 1)")));
    }

    let eps = (10f64.powf(ripple_db / 10.0) - 1.0).sqrt();
    let mu = (1.0 / eps).asinh() / order as f64;
    // pre-warped analog edge for s = 2 (z - 1) / (z + 1)
    let warped = 2.0 * (PI * cutoff / 2.0).tan();

    let poles: Vec<Complex64> = (1..=order)
        .map(|k| {
            let theta = PI * (2 * k - 1) as f64 / (2 * order) as f64;
            let analog = Complex64::new(-mu.sinh() * theta.sin(), mu.cosh() * theta.cos()) * warped;
            (2.0 + analog) / (2.0 - analog)
        })
        .map(|z| if z.im.abs() < 1e-14 { Complex64::new(z.re, 0.0) } else { z })
        .collect();
    let a = poly_from_roots(&poles);

    // all zeros at z = -1: binomial numerator, scaled for the DC gain
    let mut b = vec![1.0f64];
    for _ in 0..order {
        let mut next = vec![0.0; b.len() + 1];
        for (k, &v) in b.iter().enumerate() {
            next[k] += v;
            next[k + 1] += v;
        }
        b = next;
    }
    let dc_target = if order % 2 == 1 { 1.0 } else { 1.0 / (1.0 + eps * eps).sqrt() };
    let gain = dc_target * a.iter().sum::<f64>() / b.iter().sum::<f64>();
    b.iter_mut().for_each(|v| *v *= gain);

    DigitalFilter::new(id, &b, &a)
}
