//! Joint coherence factor weighting.
//!
//! Each entry `s[m][n]` of the signal matrix gets its own weight, measuring
//! coherence jointly along its transmit column `n` and its receive row `m`:
//!
//! ```text
//!            | Σ_m' Σ_n' s[m'][n] s[m][n'] |^α
//! w[m][n] = ---------------------------------------------
//!           (MN)^(α-1) Σ_m' Σ_n' |s[m'][n]|^α |s[m][n']|^α
//! ```
//!
//! The double sums separate into column and row sums, so the weights factor
//! as `w[m][n] = col[n] * row[m]` and the whole kernel costs O(MN) per pixel.
//! [`jcf_weights_direct`] keeps the literal quadruple loop as a reference.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;

use super::{JcfParams, WeightMatrix};

/// `|z|^alpha` with exact fast paths for the common integer exponents.
#[inline]
pub(crate) fn abs_pow(z: Complex64, alpha: f64) -> f64 {
    let sq = z.norm_sqr();
    if alpha == 2.0 {
        sq
    } else if alpha == 1.0 {
        sq.sqrt()
    } else if alpha == 4.0 {
        sq * sq
    } else if alpha == 0.0 {
        1.0
    } else {
        sq.powf(0.5 * alpha)
    }
}

#[inline]
fn real_pow(x: f64, alpha: f64) -> f64 {
    if alpha == 2.0 {
        x * x
    } else if alpha == 1.0 {
        x
    } else {
        x.powf(alpha)
    }
}

/// Separable JCF weights: `w[m][n] = col[n] * row[m]`.
#[derive(Debug, Clone, Default)]
pub struct JcfFactors {
    pub col: Vec<f64>,
    pub row: Vec<f64>,
}

impl JcfFactors {
    pub fn compute(&mut self, s: ArrayView2<'_, Complex64>, params: JcfParams) {
        let (m_count, n_count) = s.dim();
        let alpha = params.alpha();
        self.col.clear();
        self.row.clear();
        if m_count == 0 || n_count == 0 {
            return;
        }
        if alpha == 0.0 {
            self.col.resize(n_count, 1.0);
            self.row.resize(m_count, 1.0);
            return;
        }

        // Each factor is normalised by its own side, |Σ s|^α / (K^(α-1) Σ |s|^α)
        // for a line of K entries, which is at most 1 for α >= 1. Clamping
        // removes rounding overshoot there; a line whose entries are all
        // bit-identical is exactly coherent and gets exactly 1.
        let zero = Complex64::new(0.0, 0.0);
        let clamp = alpha >= 1.0;
        let mut col_sum = vec![zero; n_count];
        let mut col_pow = vec![0.0; n_count];
        let mut col_const = vec![true; n_count];
        let first = s.row(0);
        let row_norm = real_pow(n_count as f64, alpha - 1.0);
        let col_norm = real_pow(m_count as f64, alpha - 1.0);
        self.row.reserve(m_count);
        for row in s.rows() {
            let mut row_sum = zero;
            let mut row_pow = 0.0;
            let mut row_const = true;
            for (n, &v) in row.iter().enumerate() {
                let p = abs_pow(v, alpha);
                row_sum += v;
                row_pow += p;
                row_const &= v == row[0];
                col_sum[n] += v;
                col_pow[n] += p;
                col_const[n] &= v == first[n];
            }
            self.row
                .push(line_factor(row_sum, row_pow, row_const, row_norm, alpha, clamp));
        }
        self.col
            .extend((0..n_count).map(|n| line_factor(col_sum[n], col_pow[n], col_const[n], col_norm, alpha, clamp)));
    }

    pub fn to_matrix(&self) -> WeightMatrix {
        WeightMatrix::new(Array2::from_shape_fn((self.row.len(), self.col.len()), |(m, n)| {
            self.row[m] * self.col[n]
        }))
    }
}

#[inline]
fn line_factor(sum: Complex64, pow_sum: f64, constant: bool, norm: f64, alpha: f64, clamp: bool) -> f64 {
    if pow_sum == 0.0 {
        0.0
    } else if constant {
        1.0
    } else {
        let f = abs_pow(sum, alpha) / (norm * pow_sum);
        if clamp {
            f.min(1.0)
        } else {
            f
        }
    }
}

/// Factorised O(MN) evaluation of the JCF weight matrix.
pub fn jcf_weights_factorized(s: ArrayView2<'_, Complex64>, params: JcfParams) -> WeightMatrix {
    let mut f = JcfFactors::default();
    f.compute(s, params);
    f.to_matrix()
}

/// Literal quadruple-loop evaluation of the JCF weight matrix, O(M²N²).
pub fn jcf_weights_direct(s: ArrayView2<'_, Complex64>, params: JcfParams) -> WeightMatrix {
    let (m_count, n_count) = s.dim();
    let alpha = params.alpha();
    let mag = s.mapv(|v| v.norm().powf(alpha));
    let norm = ((m_count * n_count) as f64).powf(alpha - 1.0);
    let mut w = Array2::zeros((m_count, n_count));
    for m in 0..m_count {
        for n in 0..n_count {
            let mut num = Complex64::new(0.0, 0.0);
            let mut den = 0.0;
            for mp in 0..m_count {
                for np in 0..n_count {
                    num += s[(mp, n)] * s[(m, np)];
                    den += mag[(mp, n)] * mag[(m, np)];
                }
            }
            w[(m, n)] = if den == 0.0 {
                0.0
            } else {
                let v = num.norm().powf(alpha) / (norm * den);
                if alpha >= 1.0 {
                    v.min(1.0)
                } else {
                    v
                }
            };
        }
    }
    WeightMatrix::new(w)
}

/// JCF-weighted mean of the signal matrix using the factorised weights.
pub fn jcf(s: ArrayView2<'_, Complex64>, params: JcfParams) -> Complex64 {
    let mut f = JcfFactors::default();
    jcf_with(s, params, &mut f)
}

/// [`jcf`] with caller-provided scratch.
pub fn jcf_with(s: ArrayView2<'_, Complex64>, params: JcfParams, factors: &mut JcfFactors) -> Complex64 {
    let (m_count, n_count) = s.dim();
    if m_count * n_count == 0 {
        return Complex64::new(0.0, 0.0);
    }
    factors.compute(s, params);
    let mut acc = Complex64::new(0.0, 0.0);
    // Same m-major, n-minor accumulation order as `das`, so α = 0 (all
    // weights exactly 1) reproduces it bit for bit.
    for (row, &rw) in s.rows().into_iter().zip(&factors.row) {
        for (&v, &cw) in row.iter().zip(&factors.col) {
            acc += v * (rw * cw);
        }
    }
    acc / (m_count * n_count) as f64
}

/// JCF-weighted mean using the direct weights, for benchmarking against the factorised path.
pub fn jcf_direct(s: ArrayView2<'_, Complex64>, params: JcfParams) -> Complex64 {
    let (m_count, n_count) = s.dim();
    if m_count * n_count == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let w = jcf_weights_direct(s, params);
    let mut acc = Complex64::new(0.0, 0.0);
    for (row, wrow) in s.rows().into_iter().zip(w.values().rows()) {
        for (&v, &wv) in row.iter().zip(wrow) {
            acc += v * wv;
        }
    }
    acc / (m_count * n_count) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamformers::das;
    use ndarray::array;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn params(alpha: f64) -> JcfParams {
        JcfParams::new(alpha).unwrap()
    }

    #[test]
    fn hand_worked_two_by_two() {
        // Column sums (2, 0), row sums (2, 0), all magnitude sums 2.
        let s = array![[c(1.0), c(1.0)], [c(1.0), c(-1.0)]];
        let expect = array![[1.0, 0.0], [0.0, 0.0]];
        for w in [
            jcf_weights_direct(s.view(), params(1.0)),
            jcf_weights_factorized(s.view(), params(1.0)),
        ] {
            for (a, b) in w.values().iter().zip(expect.iter()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        assert!((jcf(s.view(), params(1.0)) - c(0.25)).norm() < 1e-15);
    }

    #[test]
    fn constant_matrix_is_fully_coherent() {
        let s = Array2::from_elem((3, 5), Complex64::new(0.3, -1.2));
        for alpha in [0.0, 0.5, 1.0, 2.0, 3.0, 4.0] {
            for w in [
                jcf_weights_direct(s.view(), params(alpha)),
                jcf_weights_factorized(s.view(), params(alpha)),
            ] {
                assert!(w.values().iter().all(|&v| (v - 1.0).abs() < 1e-12), "alpha={alpha}");
            }
            let w = jcf_weights_factorized(s.view(), params(alpha));
            assert!(w.values().iter().all(|&v| v == 1.0), "alpha={alpha}");
            assert!((jcf(s.view(), params(alpha)) - Complex64::new(0.3, -1.2)).norm() < 1e-12);
        }
    }

    #[test]
    fn alpha_zero_is_das_bitwise() {
        let s = Array2::from_shape_fn((4, 7), |(m, n)| {
            Complex64::new((m as f64 * 1.3 + n as f64).sin(), (n as f64 * 0.7 - m as f64).cos())
        });
        assert_eq!(jcf(s.view(), params(0.0)), das(s.view()));
        let w = jcf_weights_factorized(s.view(), params(0.0));
        assert!(w.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn zero_column_gets_zero_weight() {
        let mut s = Array2::from_shape_fn((3, 4), |(m, n)| Complex64::new(1.0 + m as f64, n as f64));
        s.column_mut(2).fill(c(0.0));
        for alpha in [1.0, 2.0, 3.5] {
            let w = jcf_weights_factorized(s.view(), params(alpha));
            assert!(w.values().column(2).iter().all(|&v| v == 0.0));
            let wd = jcf_weights_direct(s.view(), params(alpha));
            assert!(wd.values().column(2).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn abs_pow_fast_paths_agree() {
        let z = Complex64::new(0.6, -0.8);
        for alpha in [0.0, 1.0, 2.0, 4.0, 3.0, 0.5] {
            assert!((abs_pow(z * 2.0, alpha) - 2f64.powf(alpha)).abs() < 1e-12);
        }
    }
}
