use ndarray::ArrayView2;
use num_complex::Complex64;

#[inline]
pub fn signed_sqrt(v: f64) -> f64 {
    v.signum() * v.abs().sqrt()
}

/// Delay-multiply-and-sum over lags `1..=max_lag` of the angle-compounded
/// real channel signals, after signed square-root compression.
pub fn fdmas(s: ArrayView2<'_, Complex64>, max_lag: usize) -> f64 {
    let n_count = s.ncols();
    let mut compounded = vec![0.0; n_count];
    for row in s.rows() {
        for (acc, v) in compounded.iter_mut().zip(row) {
            *acc += v.re;
        }
    }
    let root: Vec<f64> = compounded
        .into_iter()
        .map(|v| if v == 0.0 { 0.0 } else { signed_sqrt(v) })
        .collect();
    let mut b = 0.0;
    for lag in 1..=max_lag.min(n_count.saturating_sub(1)) {
        for n in 0..n_count - lag {
            b += root[n] * root[n + lag];
        }
    }
    b
}
