use ndarray::ArrayView2;
use num_complex::Complex64;

/// Plain delay-and-sum: the mean of all signal-matrix entries.
pub fn das(s: ArrayView2<'_, Complex64>) -> Complex64 {
    let (m, n) = s.dim();
    if m * n == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for row in s.rows() {
        for &v in row {
            acc += v;
        }
    }
    acc / (m * n) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn mean_of_ones() {
        let s = Array2::from_elem((3, 4), Complex64::new(1.0, 0.0));
        assert_eq!(das(s.view()), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn cancellation() {
        let one = Complex64::new(1.0, 0.0);
        let s = array![[one, -one], [-one, one]];
        assert_eq!(das(s.view()), Complex64::new(0.0, 0.0));
    }
}
