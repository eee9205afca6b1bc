//! On-disk formats.
//!
//! A dataset is a pair of files sharing a stem:
//!
//! * `<stem>.json` - the [`DatasetHeader`];
//! * `<stem>.bin` - `M*N*T` little-endian IEEE-754 `f32` samples in
//!   `[transmit][element][sample]` order, no padding.
//!
//! Samples are held as `f64` in memory and rounded to `f32` on write, so a
//! dataset read from disk writes back byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::datapath::RfDataset;
use crate::display::Region;
use crate::error::{Error, Result};
use crate::geometry::{PlaneWaveSequence, ProbeGeometry, DEFAULT_SPEED_OF_SOUND};
use crate::simulator::{make_speckle_phantom, Phantom, Pulse, Scatterer};

pub const MAGIC: &str = "BPWF1";

/// Largest sample count accepted from a header (4 GiB of `f32`).
pub const MAX_SAMPLES: u64 = 1 << 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub magic: String,
    pub sample_rate: f64,
    pub t0: f64,
    #[serde(default = "default_speed_of_sound")]
    pub speed_of_sound: f64,
    #[serde(rename = "M")]
    pub m: u64,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "T")]
    pub t: u64,
    pub angles: Vec<f64>,
    pub element_positions: Vec<f64>,
    pub endianness: String,
    /// Probe centre frequency; absent in converted third-party data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_frequency: Option<f64>,
}

fn default_speed_of_sound() -> f64 {
    DEFAULT_SPEED_OF_SOUND
}

impl DatasetHeader {
    pub fn for_dataset(data: &RfDataset) -> Self {
        let (m, n, t) = data.dims();
        Self {
            magic: MAGIC.into(),
            sample_rate: data.sample_rate(),
            t0: data.t0(),
            speed_of_sound: data.speed_of_sound(),
            m: m as u64,
            n: n as u64,
            t: t as u64,
            angles: data.sequence().angles().to_vec(),
            element_positions: data.probe().element_positions().to_vec(),
            endianness: "LE".into(),
            center_frequency: Some(data.probe().center_frequency()),
        }
    }

    /// Parses and validates a header without touching sample data.
    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        let header: DatasetHeader = serde_json::from_slice(bytes).map_err(|source| Error::Json {
            context: "dataset header".into(),
            source,
        })?;
        header.validate()?;
        Ok(header)
    }

    pub fn validate(&self) -> Result<()> {
        if self.magic != MAGIC {
            return Err(Error::BadMagic {
                found: self.magic.clone(),
            });
        }
        if self.endianness != "LE" {
            return Err(Error::HeaderInconsistent(format!(
                "endianness {:?} unsupported; only \"LE\"",
                self.endianness
            )));
        }
        if self.angles.len() as u64 != self.m {
            return Err(Error::HeaderInconsistent(format!(
                "M = {} but {} angles listed",
                self.m,
                self.angles.len()
            )));
        }
        if self.element_positions.len() as u64 != self.n {
            return Err(Error::HeaderInconsistent(format!(
                "N = {} but {} element positions listed",
                self.n,
                self.element_positions.len()
            )));
        }
        self.sample_count()?;
        Ok(())
    }

    /// `M*N*T`, rejecting products that overflow or exceed [`MAX_SAMPLES`].
    pub fn sample_count(&self) -> Result<u64> {
        let too_large = || Error::DatasetTooLarge {
            m: self.m,
            n: self.n,
            t: self.t,
        };
        let count = self
            .m
            .checked_mul(self.n)
            .and_then(|v| v.checked_mul(self.t))
            .ok_or_else(too_large)?;
        if count > MAX_SAMPLES || usize::try_from(count).is_err() {
            return Err(too_large());
        }
        Ok(count)
    }

    pub fn expected_bytes(&self) -> Result<u64> {
        Ok(self.sample_count()? * 4)
    }
}

/// `<stem>.json` and `<stem>.bin`.
pub fn dataset_paths(stem: &Path) -> (PathBuf, PathBuf) {
    let with = |ext: &str| {
        let mut s = stem.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    (with(".json"), with(".bin"))
}

pub fn encode_samples(data: &RfDataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.samples().len() * 4);
    for &v in data.samples().iter() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Builds a dataset from a validated header and the raw `.bin` contents.
pub fn decode_dataset(header: &DatasetHeader, bin: &[u8]) -> Result<RfDataset> {
    header.validate()?;
    let expected = header.expected_bytes()?;
    if bin.len() as u64 != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: bin.len() as u64,
        });
    }
    let mut samples = Vec::with_capacity(bin.len() / 4);
    for (index, chunk) in bin.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        if !v.is_finite() {
            return Err(Error::NonFiniteSample { index });
        }
        samples.push(v as f64);
    }
    let (m, n, t) = (header.m as usize, header.n as usize, header.t as usize);
    let samples = Array3::from_shape_vec((m, n, t), samples).expect("length checked");
    let probe = ProbeGeometry::from_positions(
        header.element_positions.clone(),
        header.center_frequency.unwrap_or(header.sample_rate / 4.0),
    )?;
    let sequence = PlaneWaveSequence::new(header.angles.clone())?;
    RfDataset::new(
        samples,
        header.sample_rate,
        header.t0,
        header.speed_of_sound,
        probe,
        sequence,
    )
}

pub fn write_dataset(data: &RfDataset, stem: &Path) -> Result<()> {
    let (json_path, bin_path) = dataset_paths(stem);
    let header = DatasetHeader::for_dataset(data);
    let json = serde_json::to_vec_pretty(&header).map_err(|source| Error::Json {
        context: json_path.display().to_string(),
        source,
    })?;
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    fs::write(&bin_path, encode_samples(data)).map_err(|e| Error::io(&bin_path, e))?;
    Ok(())
}

pub fn read_dataset(stem: &Path) -> Result<RfDataset> {
    let (json_path, bin_path) = dataset_paths(stem);
    let json = fs::read(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let header = DatasetHeader::from_json_bytes(&json)?;
    let expected = header.expected_bytes()?;
    // Size check against metadata before reading the payload.
    let actual = fs::metadata(&bin_path).map_err(|e| Error::io(&bin_path, e))?.len();
    if actual != expected {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    let bin = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    decode_dataset(&header, &bin)
}

/// Speckle block inside a phantom document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeckleSpec {
    pub region: Region,
    /// Scatterers per square metre.
    pub density: f64,
}

/// JSON phantom description: explicit scatterers plus an optional speckle
/// background generated from `rng_seed`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomDocument {
    #[serde(default)]
    pub scatterers: Vec<Scatterer>,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub speckle: Option<SpeckleSpec>,
}

impl PhantomDocument {
    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        serde_json::from_slice(bytes).map_err(|source| Error::Json {
            context: "phantom document".into(),
            source,
        })
    }

    /// Expands the document; speckle scatterers come first, explicit ones after.
    pub fn build(&self) -> Result<Phantom> {
        let explicit = Phantom::new(self.scatterers.clone(), self.rng_seed)?;
        match &self.speckle {
            None => Ok(explicit),
            Some(spec) => Ok(make_speckle_phantom(&spec.region, spec.density, self.rng_seed)?.union(&explicit)),
        }
    }
}

pub fn read_phantom(path: &Path) -> Result<Phantom> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    PhantomDocument::from_json_bytes(&bytes)?.build()
}

/// Probe and transmit sequence description, as shipped in `configs/`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionConfig {
    #[serde(default)]
    pub name: String,
    pub elements: usize,
    pub pitch: f64,
    pub center_frequency: f64,
    #[serde(default = "default_bandwidth")]
    pub fractional_bandwidth: f64,
    pub angle_count: usize,
    pub angle_min_deg: f64,
    pub angle_max_deg: f64,
    /// Defaults to four times the centre frequency.
    #[serde(default)]
    pub sample_rate: Option<f64>,
    #[serde(default = "default_speed_of_sound")]
    pub speed_of_sound: f64,
}

fn default_bandwidth() -> f64 {
    0.6
}

impl AcquisitionConfig {
    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        serde_json::from_slice(bytes).map_err(|source| Error::Json {
            context: "acquisition config".into(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_bytes(&bytes)
    }

    pub fn probe(&self) -> Result<ProbeGeometry> {
        ProbeGeometry::linear(self.elements, self.pitch, self.center_frequency)
    }

    pub fn sequence(&self) -> Result<PlaneWaveSequence> {
        PlaneWaveSequence::uniform_degrees(self.angle_count, self.angle_min_deg, self.angle_max_deg)
    }

    pub fn pulse(&self) -> Result<Pulse> {
        Pulse::new(self.center_frequency, self.fractional_bandwidth)
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate.unwrap_or(4.0 * self.center_frequency)
    }
}
