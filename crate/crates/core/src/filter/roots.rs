//! Polynomial helpers for pole computation. Coefficients are in descending
//! powers, `c[0] z^n + c[1] z^(n-1) + ... + c[n]`, which is also how the
//! denominator of a transfer function in `z^-1` reads once multiplied by `z^n`.

use num_complex::Complex64;

const MAX_ITERS: usize = 500;

/// Horner evaluation at a complex point.
pub fn poly_eval(c: &[f64], z: Complex64) -> Complex64 {
    c.iter().fold(Complex64::new(0.0, 0.0), |acc, &k| acc * z + k)
}

fn poly_eval_complex(c: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    // value and derivative
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &k in c {
        dp = dp * z + p;
        p = p * z + k;
    }
    (p, dp)
}

/// All complex roots of a real polynomial (Aberth-Ehrlich iteration).
/// Trailing zero coefficients give roots at 0.
pub fn poly_roots(c: &[f64]) -> Vec<Complex64> {
    let lead = c.iter().position(|&k| k != 0.0);
    let Some(lead) = lead else { return Vec::new() };
    let c = &c[lead..];
    let degree = c.len() - 1;
    if degree == 0 {
        return Vec::new();
    }

    let mut zeros_at_origin = 0;
    let mut end = c.len();
    while end > 1 && c[end - 1] == 0.0 {
        zeros_at_origin += 1;
        end -= 1;
    }
    let monic: Vec<Complex64> = c[..end].iter().map(|&k| Complex64::new(k / c[0], 0.0)).collect();
    let n = monic.len() - 1;

    let mut roots: Vec<Complex64> = Vec::with_capacity(degree);
    if n > 0 {
        roots.extend(aberth(&monic));
    }
    roots.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), zeros_at_origin));
    roots
}

fn aberth(monic: &[Complex64]) -> Vec<Complex64> {
    let n = monic.len() - 1;
    // start on a circle of the geometric-mean root radius, off the real axis
    let radius = monic[n].norm().powf(1.0 / n as f64).max(1e-3);
    let mut z: Vec<Complex64> =
        (0..n).map(|k| Complex64::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4)).collect();
    for _ in 0..MAX_ITERS {
        let mut moved: f64 = 0.0;
        for i in 0..n {
            let (p, dp) = poly_eval_complex(monic, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..n).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if step.is_finite() {
                z[i] -= step;
                moved = moved.max(step.norm() / z[i].norm().max(1e-300));
            }
        }
        if moved < 1e-16 {
            break;
        }
    }
    z
}

/// Real coefficients of `prod (z - r)`. Roots must come in conjugate pairs.
pub fn poly_from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (k, &v) in c.iter().enumerate() {
            next[k] += v;
            next[k + 1] -= v * r;
        }
        c = next;
    }
    c.into_iter().map(|v| v.re).collect()
}
