//! Capon minimum-variance beamforming with subarray smoothing, axial
//! averaging and diagonal loading, applied to angle-compounded channels.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;

use super::MinVarParams;

#[derive(Debug, Clone, PartialEq)]
pub struct MinVarOutput {
    pub value: Complex64,
    /// Adaptive weights `w_MV` (length `L`); uniform `1/L` when singular.
    pub weights: Vec<Complex64>,
    /// Set when the loaded covariance could not be factorised.
    pub singular: bool,
}

/// Sum over transmits: `s_n = Σ_m s[m][n]`.
pub fn compound_rows(s: ArrayView2<'_, Complex64>) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); s.ncols()];
    for row in s.rows() {
        for (acc, &v) in out.iter_mut().zip(row) {
            *acc += v;
        }
    }
    out
}

/// Spatially smoothed, axially averaged sample covariance `R̂` (L x L).
pub fn smoothed_covariance(snapshots: &[Vec<Complex64>], subarray: usize) -> Array2<Complex64> {
    let mut r = Array2::<Complex64>::zeros((subarray, subarray));
    let mut count = 0usize;
    for snap in snapshots {
        let n_count = snap.len();
        for start in 0..=(n_count - subarray) {
            let sub = &snap[start..start + subarray];
            for i in 0..subarray {
                let si = sub[i];
                for j in i..subarray {
                    r[(i, j)] += si * sub[j].conj();
                }
            }
            count += 1;
        }
    }
    // Hermitian: fill the lower triangle from the upper one.
    let scale = if count > 0 { 1.0 / count as f64 } else { 1.0 };
    for i in 0..subarray {
        r[(i, i)] = Complex64::new(r[(i, i)].re * scale, 0.0);
        for j in i + 1..subarray {
            let v = r[(i, j)] * scale;
            r[(i, j)] = v;
            r[(j, i)] = v.conj();
        }
    }
    r
}

/// Solves `A x = b` for Hermitian positive-definite `A` via Cholesky.
/// Returns `None` when a pivot is not strictly positive.
pub fn cholesky_solve(a: &Array2<Complex64>, b: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = a.nrows();
    let mut l = Array2::<Complex64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = Complex64::new(d, 0.0);
        for i in (j + 1)..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = v / d;
        }
    }
    // L y = b
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= l[(i, k)] * y[k];
        }
        y[i] = v / l[(i, i)].re;
    }
    // L^H x = y
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut v = y[i];
        for k in (i + 1)..n {
            v -= l[(k, i)].conj() * x[k];
        }
        x[i] = v / l[(i, i)].re;
    }
    Some(x)
}

/// Minimum-variance output for the centre snapshot `snapshots[center]`,
/// with all `snapshots` (the centre plus its available axial neighbours,
/// already compounded over transmits) feeding the covariance estimate.
pub fn minvar_compounded(snapshots: &[Vec<Complex64>], center: usize, params: &MinVarParams) -> MinVarOutput {
    let l = params.subarray();
    let target = &snapshots[center];
    let n_count = target.len();
    let subarrays = n_count - l + 1;

    let r_hat = smoothed_covariance(snapshots, l);
    let trace: f64 = (0..l).map(|i| r_hat[(i, i)].re).sum();
    let loading = params.loading() / l as f64 * trace;
    let mut r_tilde = r_hat;
    for i in 0..l {
        r_tilde[(i, i)] += loading;
    }

    let steering = vec![Complex64::new(1.0, 0.0); l];
    let solved = if trace > 0.0 {
        cholesky_solve(&r_tilde, &steering).and_then(|x| {
            let denom: Complex64 = x.iter().sum();
            (denom.norm() > 0.0 && denom.re.is_finite()).then(|| x.into_iter().map(|v| v / denom).collect::<Vec<_>>())
        })
    } else {
        None
    };

    match solved {
        Some(weights) => {
            let mut acc = Complex64::new(0.0, 0.0);
            for start in 0..subarrays {
                for (w, &v) in weights.iter().zip(&target[start..start + l]) {
                    acc += w.conj() * v;
                }
            }
            MinVarOutput {
                value: acc / subarrays as f64,
                weights,
                singular: false,
            }
        }
        None => {
            let mean: Complex64 = target.iter().sum::<Complex64>() / n_count as f64;
            MinVarOutput {
                value: mean,
                weights: vec![Complex64::new(1.0 / l as f64, 0.0); l],
                singular: true,
            }
        }
    }
}

/// Minimum-variance beamforming over a stack of signal matrices at
/// neighbouring depths; `center` indexes the pixel being formed.
pub fn minvar(stack: &[ArrayView2<'_, Complex64>], center: usize, params: &MinVarParams) -> MinVarOutput {
    let snapshots: Vec<Vec<Complex64>> = stack.iter().map(|s| compound_rows(*s)).collect();
    minvar_compounded(&snapshots, center, params)
}
