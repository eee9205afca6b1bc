//! Probe, transmit sequence and imaging grid definitions, plus the
//! time-of-flight model shared by the beamformers and the simulator.
//!
//! Coordinates: `x` is azimuthal (along the array), `z` is depth. The array
//! lies on `z = 0` and is centred on `x = 0`. A plane wave steered by `θ`
//! crosses the origin at `t = 0`.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SPEED_OF_SOUND: f64 = 1540.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pixel {
    pub x: f64,
    pub z: f64,
}

impl Pixel {
    pub fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }
}

/// Plane-wave arrival time at `pixel` for steering angle `angle`.
#[inline]
pub fn tx_delay(pixel: Pixel, angle: f64, speed_of_sound: f64) -> f64 {
    (pixel.z * angle.cos() + pixel.x * angle.sin()) / speed_of_sound
}

/// Return-path time from `pixel` to the element at `element_x`.
#[inline]
pub fn rx_delay(pixel: Pixel, element_x: f64, speed_of_sound: f64) -> f64 {
    let dx = pixel.x - element_x;
    (dx * dx + pixel.z * pixel.z).sqrt() / speed_of_sound
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeGeometry {
    element_positions: Vec<f64>,
    element_pitch: f64,
    center_frequency: f64,
}

impl ProbeGeometry {
    pub fn new(element_positions: Vec<f64>, element_pitch: f64, center_frequency: f64) -> Result<Self> {
        if element_positions.len() < 2 {
            return Err(Error::Geometry(format!(
                "probe needs at least 2 elements, got {}",
                element_positions.len()
            )));
        }
        if element_positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::Geometry("element positions must be finite".into()));
        }
        if !is_strictly_increasing(&element_positions) {
            return Err(Error::Geometry("element positions must be strictly increasing".into()));
        }
        if !(element_pitch > 0.0 && element_pitch.is_finite()) {
            return Err(Error::Geometry(format!("pitch must be > 0, got {element_pitch}")));
        }
        if !(center_frequency > 0.0 && center_frequency.is_finite()) {
            return Err(Error::Geometry(format!(
                "center frequency must be > 0, got {center_frequency}"
            )));
        }
        Ok(Self {
            element_positions,
            element_pitch,
            center_frequency,
        })
    }

    /// Uniform linear array of `n` elements centred on `x = 0`.
    pub fn linear(n: usize, pitch: f64, center_frequency: f64) -> Result<Self> {
        let mid = (n as f64 - 1.0) / 2.0;
        let positions = (0..n).map(|i| (i as f64 - mid) * pitch).collect();
        Self::new(positions, pitch, center_frequency)
    }

    /// Builds a probe from positions alone, taking the pitch as the mean spacing.
    pub fn from_positions(element_positions: Vec<f64>, center_frequency: f64) -> Result<Self> {
        let n = element_positions.len();
        let pitch = if n >= 2 {
            (element_positions[n - 1] - element_positions[0]) / (n as f64 - 1.0)
        } else {
            0.0
        };
        Self::new(element_positions, pitch, center_frequency)
    }

    pub fn element_positions(&self) -> &[f64] {
        &self.element_positions
    }

    pub fn num_elements(&self) -> usize {
        self.element_positions.len()
    }

    pub fn element_pitch(&self) -> f64 {
        self.element_pitch
    }

    pub fn center_frequency(&self) -> f64 {
        self.center_frequency
    }

    pub fn aperture_width(&self) -> f64 {
        self.element_positions[self.element_positions.len() - 1] - self.element_positions[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneWaveSequence {
    angles: Vec<f64>,
}

impl PlaneWaveSequence {
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::Geometry("sequence needs at least one angle".into()));
        }
        if let Some(a) = angles
            .iter()
            .find(|a| !a.is_finite() || a.abs() >= std::f64::consts::FRAC_PI_2)
        {
            return Err(Error::Geometry(format!("steering angle {a} rad outside (-pi/2, pi/2)")));
        }
        Ok(Self { angles })
    }

    /// `count` angles uniformly spanning `[min_deg, max_deg]` inclusive.
    pub fn uniform_degrees(count: usize, min_deg: f64, max_deg: f64) -> Result<Self> {
        let angles = linspace(min_deg, max_deg, count)
            .into_iter()
            .map(f64::to_radians)
            .collect();
        Self::new(angles)
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

/// Textual grid description `x0,x1,nx,z0,z1,nz` in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x0: f64,
    pub x1: f64,
    pub nx: usize,
    pub z0: f64,
    pub z1: f64,
    pub nz: usize,
}

/// Upper bound on pixels per grid, well above any desk-scale image.
pub const MAX_GRID_PIXELS: usize = 1 << 26;

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, lo, hi, n) in [("x", self.x0, self.x1, self.nx), ("z", self.z0, self.z1, self.nz)] {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Geometry(format!("{name} bounds must be finite")));
            }
            if n == 0 {
                return Err(Error::Geometry(format!("n{name} must be at least 1")));
            }
            if n == 1 && lo != hi {
                return Err(Error::Geometry(format!("n{name} = 1 requires {name}0 == {name}1")));
            }
            if n > 1 && hi <= lo {
                return Err(Error::Geometry(format!("{name}1 must exceed {name}0")));
            }
        }
        if self.z0 <= 0.0 {
            return Err(Error::Geometry(format!("z0 must be > 0, got {}", self.z0)));
        }
        match self.nx.checked_mul(self.nz) {
            Some(p) if p <= MAX_GRID_PIXELS => Ok(()),
            _ => Err(Error::Geometry(format!(
                "grid of {} x {} pixels exceeds the {MAX_GRID_PIXELS}-pixel limit",
                self.nx, self.nz
            ))),
        }
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 6 {
            return Err(Error::Parameter(format!(
                "grid spec needs 6 comma-separated fields x0,x1,nx,z0,z1,nz; got {:?}",
                s
            )));
        }
        let float = |i: usize| {
            parts[i]
                .parse::<f64>()
                .map_err(|e| Error::Parameter(format!("grid field {}: {:?}: {e}", i + 1, parts[i])))
        };
        let count = |i: usize| {
            parts[i]
                .parse::<usize>()
                .map_err(|e| Error::Parameter(format!("grid field {}: {:?}: {e}", i + 1, parts[i])))
        };
        let spec = GridSpec {
            x0: float(0)?,
            x1: float(1)?,
            nx: count(2)?,
            z0: float(3)?,
            z1: float(4)?,
            nz: count(5)?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagingGrid {
    x_coords: Vec<f64>,
    z_coords: Vec<f64>,
    speed_of_sound: f64,
}

impl ImagingGrid {
    pub fn new(x_coords: Vec<f64>, z_coords: Vec<f64>, speed_of_sound: f64) -> Result<Self> {
        if x_coords.is_empty() || z_coords.is_empty() {
            return Err(Error::Geometry("grid axes must be non-empty".into()));
        }
        if x_coords.iter().chain(&z_coords).any(|v| !v.is_finite()) {
            return Err(Error::Geometry("grid coordinates must be finite".into()));
        }
        if !is_strictly_increasing(&x_coords) || !is_strictly_increasing(&z_coords) {
            return Err(Error::Geometry("grid coordinates must be strictly increasing".into()));
        }
        if z_coords[0] <= 0.0 {
            return Err(Error::Geometry("all z coordinates must be > 0".into()));
        }
        if !(speed_of_sound > 0.0 && speed_of_sound.is_finite()) {
            return Err(Error::Geometry(format!(
                "speed of sound must be > 0, got {speed_of_sound}"
            )));
        }
        Ok(Self {
            x_coords,
            z_coords,
            speed_of_sound,
        })
    }

    pub fn from_spec(spec: &GridSpec, speed_of_sound: f64) -> Result<Self> {
        spec.validate()?;
        Self::new(
            linspace(spec.x0, spec.x1, spec.nx),
            linspace(spec.z0, spec.z1, spec.nz),
            speed_of_sound,
        )
    }

    pub fn x_coords(&self) -> &[f64] {
        &self.x_coords
    }

    pub fn z_coords(&self) -> &[f64] {
        &self.z_coords
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.speed_of_sound
    }

    pub fn nx(&self) -> usize {
        self.x_coords.len()
    }

    pub fn nz(&self) -> usize {
        self.z_coords.len()
    }

    pub fn num_pixels(&self) -> usize {
        self.nx() * self.nz()
    }

    /// Pixel at row `iz` (depth index) and column `ix`.
    pub fn pixel(&self, iz: usize, ix: usize) -> Pixel {
        Pixel::new(self.x_coords[ix], self.z_coords[iz])
    }

    /// Spacing along x and z; zero along an axis with a single node.
    pub fn cell_size(&self) -> (f64, f64) {
        (axis_step(&self.x_coords), axis_step(&self.z_coords))
    }

    pub fn tx_delay(&self, pixel: Pixel, angle: f64) -> f64 {
        tx_delay(pixel, angle, self.speed_of_sound)
    }

    pub fn rx_delay(&self, pixel: Pixel, element_x: f64) -> f64 {
        rx_delay(pixel, element_x, self.speed_of_sound)
    }
}

/// Optional receive f-number mask. Elements with `|x - x_n| / z > 1 / (2F)`
/// are excluded from the signal matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ReceiveAperture {
    pub f_number: Option<f64>,
}

impl ReceiveAperture {
    pub fn full() -> Self {
        Self { f_number: None }
    }

    pub fn with_f_number(f_number: f64) -> Result<Self> {
        if !(f_number > 0.0 && f_number.is_finite()) {
            return Err(Error::Parameter(format!("f-number must be > 0, got {f_number}")));
        }
        Ok(Self {
            f_number: Some(f_number),
        })
    }

    #[inline]
    pub fn accepts(&self, pixel: Pixel, element_x: f64) -> bool {
        match self.f_number {
            None => true,
            Some(f) => (pixel.x - element_x).abs() / pixel.z <= 1.0 / (2.0 * f),
        }
    }
}

/// `n` evenly spaced values over `[lo, hi]`; a single node sits at `lo`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n as f64 - 1.0);
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

fn is_strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

fn axis_step(v: &[f64]) -> f64 {
    if v.len() < 2 {
        0.0
    } else {
        (v[v.len() - 1] - v[0]) / (v.len() as f64 - 1.0)
    }
}
