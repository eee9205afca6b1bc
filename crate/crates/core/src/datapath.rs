//! RF channel data, its analytic (complex) form, and assembly of the
//! per-pixel `M x N` signal matrix.

use std::sync::Arc;

use ndarray::{Array2, Array3, ArrayViewMut2};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::geometry::{rx_delay, tx_delay, ImagingGrid, Pixel, PlaneWaveSequence, ProbeGeometry, ReceiveAperture};

/// Real channel data indexed `[transmit][element][sample]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RfDataset {
    samples: Array3<f64>,
    sample_rate: f64,
    t0: f64,
    speed_of_sound: f64,
    probe: ProbeGeometry,
    sequence: PlaneWaveSequence,
}

impl RfDataset {
    pub fn new(
        samples: Array3<f64>,
        sample_rate: f64,
        t0: f64,
        speed_of_sound: f64,
        probe: ProbeGeometry,
        sequence: PlaneWaveSequence,
    ) -> Result<Self> {
        let (m, n, _) = samples.dim();
        check_metadata(
            m,
            n,
            samples.dim().2,
            sample_rate,
            t0,
            speed_of_sound,
            &probe,
            &sequence,
        )?;
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput { index });
        }
        Ok(Self {
            samples,
            sample_rate,
            t0,
            speed_of_sound,
            probe,
            sequence,
        })
    }

    pub fn samples(&self) -> &Array3<f64> {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.speed_of_sound
    }

    pub fn probe(&self) -> &ProbeGeometry {
        &self.probe
    }

    pub fn sequence(&self) -> &PlaneWaveSequence {
        &self.sequence
    }

    /// `(M, N, T)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        self.samples.dim()
    }

    pub fn into_samples(self) -> Array3<f64> {
        self.samples
    }
}

#[allow(clippy::too_many_arguments)]
fn check_metadata(
    m: usize,
    n: usize,
    t: usize,
    sample_rate: f64,
    t0: f64,
    speed_of_sound: f64,
    probe: &ProbeGeometry,
    sequence: &PlaneWaveSequence,
) -> Result<()> {
    if m != sequence.len() {
        return Err(Error::Geometry(format!(
            "sample array has {m} transmits but the sequence has {} angles",
            sequence.len()
        )));
    }
    if n != probe.num_elements() {
        return Err(Error::Geometry(format!(
            "sample array has {n} channels but the probe has {} elements",
            probe.num_elements()
        )));
    }
    if t < 2 {
        return Err(Error::Geometry(format!("traces need at least 2 samples, got {t}")));
    }
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(Error::Geometry(format!("sample rate must be > 0, got {sample_rate}")));
    }
    if !t0.is_finite() {
        return Err(Error::Geometry("t0 must be finite".into()));
    }
    if !(speed_of_sound > 0.0 && speed_of_sound.is_finite()) {
        return Err(Error::Geometry(format!(
            "speed of sound must be > 0, got {speed_of_sound}"
        )));
    }
    Ok(())
}

/// Forward/inverse FFT pair for one trace length.
pub struct AnalyticTransform {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl AnalyticTransform {
    pub fn new(len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::Parameter(format!(
                "analytic signal needs at least 2 samples, got {len}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// One-sided-spectrum analytic signal of `trace`.
    pub fn apply(&self, trace: &[f64]) -> Result<Vec<Complex64>> {
        if trace.len() != self.len {
            return Err(Error::Parameter(format!(
                "trace length {} does not match transform length {}",
                trace.len(),
                self.len
            )));
        }
        if let Some(index) = trace.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput { index });
        }
        let t = self.len;
        let mut buf: Vec<Complex64> = trace.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);

        // Bins 1..ceil(T/2) are strictly positive frequencies; for even T the
        // Nyquist bin T/2 is shared and stays unscaled like DC.
        let positive_end = t.div_ceil(2);
        for b in &mut buf[1..positive_end] {
            *b *= 2.0;
        }
        let negative_start = t / 2 + 1;
        for b in &mut buf[negative_start..] {
            *b = Complex64::new(0.0, 0.0);
        }

        self.inverse.process(&mut buf);
        let scale = 1.0 / t as f64;
        for b in &mut buf {
            *b *= scale;
        }
        Ok(buf)
    }
}

/// One-sided-spectrum analytic signal of a real trace.
pub fn analytic_signal(trace: &[f64]) -> Result<Vec<Complex64>> {
    AnalyticTransform::new(trace.len())?.apply(trace)
}

/// Linearly interpolated sample of `trace` at time `t`; zero outside the record.
#[inline]
pub fn sample_trace(trace: &[Complex64], t: f64, sample_rate: f64, t0: f64) -> Complex64 {
    interpolate(trace, (t - t0) * sample_rate)
}

#[inline]
fn interpolate(trace: &[Complex64], index: f64) -> Complex64 {
    let last = trace.len() as f64 - 1.0;
    // NaN fails both comparisons and falls through to zero.
    if index >= 0.0 && index <= last {
        let i = index.floor();
        let frac = index - i;
        let i = i as usize;
        if frac == 0.0 {
            trace[i]
        } else {
            trace[i] + (trace[i + 1] - trace[i]) * frac
        }
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// Channel data after per-trace analytic conversion.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticDataset {
    samples: Array3<Complex64>,
    sample_rate: f64,
    t0: f64,
    speed_of_sound: f64,
    probe: ProbeGeometry,
    sequence: PlaneWaveSequence,
}

impl AnalyticDataset {
    pub fn from_rf(rf: &RfDataset) -> Result<Self> {
        let (m, n, t) = rf.dims();
        let transform = AnalyticTransform::new(t)?;
        let rf_samples = rf.samples.as_standard_layout();
        let flat = rf_samples.as_slice().expect("standard layout");
        let traces: Vec<Vec<Complex64>> = flat
            .par_chunks(t)
            .map(|trace| transform.apply(trace))
            .collect::<Result<_>>()?;
        let mut samples = Vec::with_capacity(m * n * t);
        for trace in traces {
            samples.extend(trace);
        }
        let samples = Array3::from_shape_vec((m, n, t), samples).expect("shape matches");
        Ok(Self {
            samples,
            sample_rate: rf.sample_rate,
            t0: rf.t0,
            speed_of_sound: rf.speed_of_sound,
            probe: rf.probe.clone(),
            sequence: rf.sequence.clone(),
        })
    }

    /// Wraps already-complex channel data.
    pub fn from_complex(
        samples: Array3<Complex64>,
        sample_rate: f64,
        t0: f64,
        speed_of_sound: f64,
        probe: ProbeGeometry,
        sequence: PlaneWaveSequence,
    ) -> Result<Self> {
        let (m, n, t) = samples.dim();
        check_metadata(m, n, t, sample_rate, t0, speed_of_sound, &probe, &sequence)?;
        if let Some(index) = samples.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFiniteInput { index });
        }
        Ok(Self {
            samples: samples.as_standard_layout().into_owned(),
            sample_rate,
            t0,
            speed_of_sound,
            probe,
            sequence,
        })
    }

    pub fn samples(&self) -> &Array3<Complex64> {
        &self.samples
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.samples.dim()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.speed_of_sound
    }

    pub fn probe(&self) -> &ProbeGeometry {
        &self.probe
    }

    pub fn sequence(&self) -> &PlaneWaveSequence {
        &self.sequence
    }

    pub fn trace(&self, m: usize, n: usize) -> &[Complex64] {
        let t = self.samples.dim().2;
        let start = (m * self.samples.dim().1 + n) * t;
        &self.flat()[start..start + t]
    }

    fn flat(&self) -> &[Complex64] {
        self.samples.as_slice().expect("standard layout")
    }
}

/// Time-aligned analytic samples for one pixel, rows are transmits and
/// columns are receive elements.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    pub entries: Array2<Complex64>,
    pub pixel: Pixel,
}

/// Reusable per-pixel delay-and-interpolate engine.
pub struct SignalMatrixBuilder<'a> {
    data: &'a AnalyticDataset,
    speed_of_sound: f64,
    aperture: ReceiveAperture,
    tx_dir: Vec<(f64, f64)>,
}

impl<'a> SignalMatrixBuilder<'a> {
    pub fn new(data: &'a AnalyticDataset, speed_of_sound: f64, aperture: ReceiveAperture) -> Self {
        let tx_dir = data.sequence.angles().iter().map(|a| (a.cos(), a.sin())).collect();
        Self {
            data,
            speed_of_sound,
            aperture,
            tx_dir,
        }
    }

    pub fn for_grid(data: &'a AnalyticDataset, grid: &ImagingGrid, aperture: ReceiveAperture) -> Self {
        Self::new(data, grid.speed_of_sound(), aperture)
    }

    /// `(M, N)`.
    pub fn shape(&self) -> (usize, usize) {
        let (m, n, _) = self.data.dims();
        (m, n)
    }

    pub fn build(&self, pixel: Pixel) -> SignalMatrix {
        let mut entries = Array2::zeros(self.shape());
        let mut rx = Vec::new();
        self.fill(pixel, entries.view_mut(), &mut rx);
        SignalMatrix { entries, pixel }
    }

    /// Writes the signal matrix for `pixel` into `out`; `rx_scratch` is reused
    /// across calls to avoid per-pixel allocation.
    pub fn fill(&self, pixel: Pixel, mut out: ArrayViewMut2<'_, Complex64>, rx_scratch: &mut Vec<f64>) {
        let (m_count, n_count, t_len) = self.data.dims();
        let fs = self.data.sample_rate;
        let t0 = self.data.t0;
        let c = self.speed_of_sound;
        let positions = self.data.probe.element_positions();
        let zero = Complex64::new(0.0, 0.0);

        // Receive leg folded with -t0 once per pixel, in samples. NaN marks
        // elements masked by the aperture.
        rx_scratch.clear();
        rx_scratch.extend(positions.iter().map(|&xe| {
            if self.aperture.accepts(pixel, xe) {
                (rx_delay(pixel, xe, c) - t0) * fs
            } else {
                f64::NAN
            }
        }));

        let flat = self.data.flat();
        for m in 0..m_count {
            let (cos_t, sin_t) = self.tx_dir[m];
            let tx = (pixel.z * cos_t + pixel.x * sin_t) / c * fs;
            let base = m * n_count * t_len;
            let mut row = out.row_mut(m);
            for n in 0..n_count {
                let rx = rx_scratch[n];
                row[n] = if rx.is_nan() {
                    zero
                } else {
                    let start = base + n * t_len;
                    interpolate(&flat[start..start + t_len], tx + rx)
                };
            }
        }
    }
}

/// Signal matrix at `pixel` using the grid's speed of sound and the full aperture.
pub fn build_signal_matrix(data: &AnalyticDataset, pixel: Pixel, grid: &ImagingGrid) -> SignalMatrix {
    SignalMatrixBuilder::for_grid(data, grid, ReceiveAperture::full()).build(pixel)
}

/// Round-trip time for transmit `m`, element `n`, as used by [`SignalMatrixBuilder`].
pub fn round_trip_delay(data: &AnalyticDataset, pixel: Pixel, m: usize, n: usize, speed_of_sound: f64) -> f64 {
    tx_delay(pixel, data.sequence.angles()[m], speed_of_sound)
        + rx_delay(pixel, data.probe.element_positions()[n], speed_of_sound)
}
