//! Row- and matrix-level coherence factors: CF, GCF, PCF and UCF.
//!
//! CF, GCF and PCF weight each transmit row by a scalar `w_m` and normalise
//! the weighted sum by `1/N`; UCF weights the whole matrix by one scalar and
//! does not normalise. Both conventions are kept as tabulated.

use std::f64::consts::PI;

use ndarray::ArrayView2;
use num_complex::Complex64;

fn row_weighted_sum(s: ArrayView2<'_, Complex64>, weights: &[f64]) -> Complex64 {
    let n_count = s.ncols();
    if n_count == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (row, &w) in s.rows().into_iter().zip(weights) {
        for &v in row {
            acc += v * w;
        }
    }
    acc / n_count as f64
}

/// Per-transmit coherence factor `|Σ_n s|² / (N Σ_n |s|²)`.
pub fn cf_weights(s: ArrayView2<'_, Complex64>) -> Vec<f64> {
    let n_count = s.ncols() as f64;
    s.rows()
        .into_iter()
        .map(|row| {
            let coherent: Complex64 = row.iter().sum();
            let incoherent: f64 = row.iter().map(|v| v.norm_sqr()).sum();
            if incoherent == 0.0 {
                0.0
            } else {
                (coherent.norm_sqr() / (n_count * incoherent)).min(1.0)
            }
        })
        .collect()
}

pub fn cf(s: ArrayView2<'_, Complex64>) -> Complex64 {
    row_weighted_sum(s, &cf_weights(s))
}

/// Generalised coherence factor: fraction of each row's aperture-domain
/// spectral energy lying within `cutoff` bins (circular distance) of DC.
#[derive(Debug, Clone)]
pub struct GcfKernel {
    n: usize,
    /// `exp(-2πi k n / N)` for each low-frequency bin `k`, row-major by bin.
    twiddles: Vec<Complex64>,
    bins: usize,
}

impl GcfKernel {
    /// Panics if `cutoff >= n`; [`super::Method::resolve`] checks that first.
    pub fn new(n: usize, cutoff: usize) -> Self {
        assert!(cutoff < n, "GCF cutoff {cutoff} must be < N = {n}");
        let lf: Vec<usize> = (0..n).filter(|&k| k.min(n - k) <= cutoff).collect();
        let mut twiddles = Vec::with_capacity(lf.len() * n);
        for &k in &lf {
            for j in 0..n {
                // Reduce k*j mod N first so the phase stays accurate for large N.
                let phase = -2.0 * PI * ((k * j) % n) as f64 / n as f64;
                twiddles.push(Complex64::from_polar(1.0, phase));
            }
        }
        Self {
            n,
            twiddles,
            bins: lf.len(),
        }
    }

    pub fn weights(&self, s: ArrayView2<'_, Complex64>) -> Vec<f64> {
        assert_eq!(s.ncols(), self.n);
        s.rows()
            .into_iter()
            .map(|row| {
                // Parseval: Σ_k |X_k|² = N Σ_n |s_n|².
                let total: f64 = row.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.n as f64;
                if total == 0.0 {
                    return 0.0;
                }
                if self.bins == self.n {
                    return 1.0;
                }
                let low: f64 = self
                    .twiddles
                    .chunks_exact(self.n)
                    .map(|tw| {
                        let x: Complex64 = tw.iter().zip(row.iter()).map(|(t, v)| t * v).sum();
                        x.norm_sqr()
                    })
                    .sum();
                (low / total).min(1.0)
            })
            .collect()
    }

    pub fn beamform(&self, s: ArrayView2<'_, Complex64>) -> Complex64 {
        row_weighted_sum(s, &self.weights(s))
    }
}

pub fn gcf_weights(s: ArrayView2<'_, Complex64>, cutoff: usize) -> Vec<f64> {
    GcfKernel::new(s.ncols(), cutoff).weights(s)
}

pub fn gcf(s: ArrayView2<'_, Complex64>, cutoff: usize) -> Complex64 {
    GcfKernel::new(s.ncols(), cutoff).beamform(s)
}

fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    var.sqrt()
}

/// Phase spread of one row: the smaller of the standard deviations of the
/// phases taken in `(-π, π]` and in `(0, 2π]`. Zero entries have phase 0.
pub fn phase_spread(row: impl IntoIterator<Item = Complex64>) -> f64 {
    let raw: Vec<f64> = row
        .into_iter()
        .map(|v| if v.norm_sqr() == 0.0 { 0.0 } else { v.arg() })
        .collect();
    let shifted: Vec<f64> = raw.iter().map(|&p| if p > 0.0 { p } else { p + 2.0 * PI }).collect();
    population_std(&raw).min(population_std(&shifted))
}

/// Phase coherence factor per transmit row, `max(0, 1 - γ/σ0 · p_m)`.
pub fn pcf_weights(s: ArrayView2<'_, Complex64>, gamma: f64, sigma0: f64) -> Vec<f64> {
    s.rows()
        .into_iter()
        .map(|row| {
            let p = phase_spread(row.iter().copied());
            (1.0 - gamma / sigma0 * p).max(0.0)
        })
        .collect()
}

pub fn pcf(s: ArrayView2<'_, Complex64>, gamma: f64, sigma0: f64) -> Complex64 {
    row_weighted_sum(s, &pcf_weights(s, gamma, sigma0))
}

/// United coherence factor over the full matrix.
pub fn ucf_weight(s: ArrayView2<'_, Complex64>) -> f64 {
    let (m, n) = s.dim();
    let coherent: Complex64 = s.iter().sum();
    let incoherent: f64 = s.iter().map(|v| v.norm_sqr()).sum();
    if incoherent == 0.0 {
        0.0
    } else {
        (coherent.norm_sqr() / ((m * n) as f64 * incoherent)).min(1.0)
    }
}

pub fn ucf(s: ArrayView2<'_, Complex64>) -> Complex64 {
    let total: Complex64 = s.iter().sum();
    total * ucf_weight(s)
}
