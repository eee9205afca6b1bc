//! Linear single-scattering RF simulator.
//!
//! Each channel trace is a superposition of Gaussian-enveloped tone bursts,
//! one per scatterer, delayed by the same transmit and receive travel times
//! the beamformers use. No attenuation and no multiple scattering, so the
//! output is exactly linear in the scatterer amplitudes.

use std::f64::consts::PI;

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datapath::RfDataset;
use crate::display::Region;
use crate::error::{Error, Result};
use crate::geometry::{rx_delay, tx_delay, Pixel, PlaneWaveSequence, ProbeGeometry};

/// Envelope half-width in standard deviations beyond which the pulse is
/// treated as zero (relative amplitude below 2e-8).
const PULSE_SUPPORT_SIGMAS: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub x: f64,
    pub z: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Phantom {
    pub scatterers: Vec<Scatterer>,
    #[serde(default)]
    pub rng_seed: u64,
}

impl Phantom {
    pub fn new(scatterers: Vec<Scatterer>, rng_seed: u64) -> Result<Self> {
        let p = Self { scatterers, rng_seed };
        p.validate()?;
        Ok(p)
    }

    pub fn point(x: f64, z: f64, amplitude: f64) -> Result<Self> {
        Self::new(vec![Scatterer { x, z, amplitude }], 0)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.scatterers.iter().enumerate() {
            if !(s.x.is_finite() && s.z.is_finite() && s.amplitude.is_finite()) {
                return Err(Error::Parameter(format!("scatterer {i} has non-finite fields")));
            }
            if s.z <= 0.0 {
                return Err(Error::Parameter(format!("scatterer {i} has z = {} <= 0", s.z)));
            }
        }
        Ok(())
    }

    /// Scatterers of `self` followed by those of `other`.
    pub fn union(&self, other: &Phantom) -> Phantom {
        let mut scatterers = self.scatterers.clone();
        scatterers.extend_from_slice(&other.scatterers);
        Phantom {
            scatterers,
            rng_seed: self.rng_seed,
        }
    }

    pub fn len(&self) -> usize {
        self.scatterers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scatterers.is_empty()
    }
}

/// Gaussian-enveloped cosine. `fractional_bandwidth` is the -6 dB width of
/// the amplitude spectrum relative to the centre frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub center_frequency: f64,
    pub fractional_bandwidth: f64,
}

impl Default for Pulse {
    fn default() -> Self {
        Self {
            center_frequency: 5e6,
            fractional_bandwidth: 0.6,
        }
    }
}

impl Pulse {
    pub fn new(center_frequency: f64, fractional_bandwidth: f64) -> Result<Self> {
        if !(center_frequency > 0.0 && center_frequency.is_finite()) {
            return Err(Error::Parameter(format!(
                "pulse center frequency must be > 0, got {center_frequency}"
            )));
        }
        if !(fractional_bandwidth > 0.0 && fractional_bandwidth.is_finite()) {
            return Err(Error::Parameter(format!(
                "pulse fractional bandwidth must be > 0, got {fractional_bandwidth}"
            )));
        }
        Ok(Self {
            center_frequency,
            fractional_bandwidth,
        })
    }

    /// Standard deviation of the time envelope.
    pub fn sigma_t(&self) -> f64 {
        // Amplitude spectrum exp(-(f-fc)²/(2σf²)) is at half height when
        // |f - fc| = σf √(2 ln 2).
        let sigma_f = self.fractional_bandwidth * self.center_frequency / (2.0 * (2.0 * 2f64.ln()).sqrt());
        1.0 / (2.0 * PI * sigma_f)
    }

    pub fn half_support(&self) -> f64 {
        PULSE_SUPPORT_SIGMAS * self.sigma_t()
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        let s = self.sigma_t();
        (-(t * t) / (2.0 * s * s)).exp() * (2.0 * PI * self.center_frequency * t).cos()
    }

    pub fn wavelength(&self, speed_of_sound: f64) -> f64 {
        speed_of_sound / self.center_frequency
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub sample_rate: f64,
    pub t0: f64,
    pub duration: f64,
    pub speed_of_sound: f64,
    /// Weight each receive path by the cosine of its angle to the array normal.
    #[serde(default)]
    pub directivity: bool,
}

impl SimulationConfig {
    /// Record window that just covers every echo of `phantom`, padded by `margin` seconds.
    pub fn covering(
        phantom: &Phantom,
        probe: &ProbeGeometry,
        sequence: &PlaneWaveSequence,
        pulse: &Pulse,
        sample_rate: f64,
        speed_of_sound: f64,
        margin: f64,
    ) -> Result<Self> {
        let (lo, hi) = delay_span(phantom, probe, sequence, speed_of_sound)
            .ok_or_else(|| Error::Parameter("cannot size a record window for an empty phantom".into()))?;
        let hs = pulse.half_support();
        let t0 = ((lo - hs - margin) * sample_rate).floor() / sample_rate;
        Ok(Self {
            sample_rate,
            t0,
            duration: hi + hs + margin - t0,
            speed_of_sound,
            directivity: false,
        })
    }

    pub fn num_samples(&self) -> usize {
        (self.duration * self.sample_rate).ceil() as usize + 1
    }
}

fn delay_span(phantom: &Phantom, probe: &ProbeGeometry, sequence: &PlaneWaveSequence, c: f64) -> Option<(f64, f64)> {
    let mut span: Option<(f64, f64)> = None;
    for s in &phantom.scatterers {
        let (lo, hi) = scatterer_delay_span(s, probe, sequence, c);
        span = Some(match span {
            None => (lo, hi),
            Some((a, b)) => (a.min(lo), b.max(hi)),
        });
    }
    span
}

fn scatterer_delay_span(s: &Scatterer, probe: &ProbeGeometry, sequence: &PlaneWaveSequence, c: f64) -> (f64, f64) {
    let p = Pixel::new(s.x, s.z);
    let tx = sequence.angles().iter().map(|&a| tx_delay(p, a, c));
    let (tx_lo, tx_hi) = tx.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), t| (a.min(t), b.max(t)));
    let rx = probe.element_positions().iter().map(|&x| rx_delay(p, x, c));
    let (rx_lo, rx_hi) = rx.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), t| (a.min(t), b.max(t)));
    (tx_lo + rx_lo, tx_hi + rx_hi)
}

/// Synthesises channel data for `phantom`.
pub fn simulate_rf(
    phantom: &Phantom,
    probe: &ProbeGeometry,
    sequence: &PlaneWaveSequence,
    pulse: &Pulse,
    config: &SimulationConfig,
) -> Result<RfDataset> {
    phantom.validate()?;
    let fs = config.sample_rate;
    let c = config.speed_of_sound;
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::Parameter(format!("sample rate must be > 0, got {fs}")));
    }
    if !(config.duration > 0.0 && config.duration.is_finite()) {
        return Err(Error::Parameter(format!(
            "duration must be > 0, got {}",
            config.duration
        )));
    }
    let t_len = config.num_samples();
    let record_end = config.t0 + (t_len - 1) as f64 / fs;
    let hs = pulse.half_support();

    for s in &phantom.scatterers {
        let (lo, hi) = scatterer_delay_span(s, probe, sequence, c);
        if lo - hs < config.t0 || hi + hs > record_end {
            let required_t0 = config.t0.min(lo - hs);
            return Err(Error::RecordTooShort {
                x: s.x,
                z: s.z,
                required_duration: (hi + hs).max(record_end) - required_t0,
                required_t0,
            });
        }
    }

    let m_count = sequence.len();
    let n_count = probe.num_elements();
    let angles = sequence.angles();
    let positions = probe.element_positions();
    let sigma_t = pulse.sigma_t();
    let inv_two_var = 1.0 / (2.0 * sigma_t * sigma_t);
    let omega = 2.0 * PI * pulse.center_frequency;

    let mut samples = vec![0.0; m_count * n_count * t_len];
    samples
        .par_chunks_mut(t_len)
        .enumerate()
        .for_each(|(trace_idx, trace)| {
            let angle = angles[trace_idx / n_count];
            let element = positions[trace_idx % n_count];
            for s in &phantom.scatterers {
                let p = Pixel::new(s.x, s.z);
                let tau = tx_delay(p, angle, c) + rx_delay(p, element, c);
                let mut amp = s.amplitude;
                if config.directivity {
                    let dx = s.x - element;
                    amp *= s.z / (dx * dx + s.z * s.z).sqrt();
                }
                let first = ((tau - hs - config.t0) * fs).ceil().max(0.0) as usize;
                let last = (((tau + hs - config.t0) * fs).floor() as usize).min(t_len - 1);
                for (k, out) in trace.iter_mut().enumerate().take(last + 1).skip(first) {
                    let t = config.t0 + k as f64 / fs - tau;
                    *out += amp * (-(t * t) * inv_two_var).exp() * (omega * t).cos();
                }
            }
        });

    let samples = Array3::from_shape_vec((m_count, n_count, t_len), samples).expect("shape matches");
    RfDataset::new(samples, fs, config.t0, c, probe.clone(), sequence.clone())
}

/// Smallest speckle density (scatterers per m²) giving ten scatterers per
/// `λ x λ` resolution cell.
pub fn min_speckle_density(pulse: &Pulse, speed_of_sound: f64) -> f64 {
    let lambda = pulse.wavelength(speed_of_sound);
    10.0 / (lambda * lambda)
}

/// Uniformly placed scatterers with standard-normal amplitudes.
pub fn make_speckle_phantom(region: &Region, density: f64, seed: u64) -> Result<Phantom> {
    if !(region.x1 > region.x0 && region.z1 > region.z0 && region.z0 > 0.0) {
        return Err(Error::Parameter(format!(
            "speckle region {region:?} must be non-empty with z0 > 0"
        )));
    }
    if !(density >= 0.0 && density.is_finite()) {
        return Err(Error::Parameter(format!("speckle density must be >= 0, got {density}")));
    }
    let area = (region.x1 - region.x0) * (region.z1 - region.z0);
    let count = (density * area).round();
    if count > 1e8 {
        return Err(Error::Parameter(format!(
            "speckle phantom of {count} scatterers is too large"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scatterers = (0..count as usize)
        .map(|_| {
            let x = region.x0 + rng.random::<f64>() * (region.x1 - region.x0);
            let z = region.z0 + rng.random::<f64>() * (region.z1 - region.z0);
            let amplitude: f64 = rng.sample(StandardNormal);
            Scatterer { x, z, amplitude }
        })
        .collect();
    Ok(Phantom {
        scatterers,
        rng_seed: seed,
    })
}
