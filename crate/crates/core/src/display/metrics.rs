use std::io::Write;

use serde::{Deserialize, Serialize};

use super::DisplayImage;
use crate::error::{Error, Result};
use crate::geometry::ImagingGrid;

pub const CSV_HEADER: &str = "algorithm,gamma,contrast_K,peak_x_m,peak_z_m,fwhm_x_m,fwhm_z_m,background_mean,elapsed_s";

/// Axis-aligned rectangle in metres, bounds inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x0: f64,
    pub x1: f64,
    pub z0: f64,
    pub z1: f64,
}

impl Region {
    pub fn new(x0: f64, x1: f64, z0: f64, z1: f64) -> Self {
        Self { x0, x1, z0, z1 }
    }

    pub fn whole(grid: &ImagingGrid) -> Self {
        let xs = grid.x_coords();
        let zs = grid.z_coords();
        Self::new(xs[0], xs[xs.len() - 1], zs[0], zs[zs.len() - 1])
    }

    /// Parses `x0,x1,z0,z1` in metres.
    pub fn parse(s: &str) -> Result<Self> {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parameter(format!("region {s:?}: {e}")))?;
        if v.len() != 4 || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter(format!(
                "region needs 4 finite values x0,x1,z0,z1; got {s:?}"
            )));
        }
        Ok(Self::new(v[0], v[1], v[2], v[3]))
    }

    /// Index ranges `(iz_range, ix_range)` of grid nodes inside the region.
    fn indices(&self, grid: &ImagingGrid) -> Result<(std::ops::Range<usize>, std::ops::Range<usize>)> {
        let span = |coords: &[f64], lo: f64, hi: f64| {
            let start = coords.iter().position(|&c| c >= lo);
            let end = coords.iter().rposition(|&c| c <= hi);
            match (start, end) {
                (Some(a), Some(b)) if a <= b => Some(a..b + 1),
                _ => None,
            }
        };
        match (
            span(grid.z_coords(), self.z0, self.z1),
            span(grid.x_coords(), self.x0, self.x1),
        ) {
            (Some(z), Some(x)) => Ok((z, x)),
            _ => Err(Error::Parameter(format!("region {self:?} contains no grid nodes"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportFlags {
    /// The peak window is flat, so there is no point response to measure.
    pub no_peak: bool,
    pub fwhm_x_clipped: bool,
    pub fwhm_z_clipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub algorithm: String,
    pub gamma: f64,
    pub contrast_k: f64,
    pub peak_x: f64,
    pub peak_z: f64,
    pub fwhm_x: f64,
    pub fwhm_z: f64,
    /// Mean display value in the background region as a fraction of the image maximum.
    pub background_mean: f64,
    pub elapsed: f64,
    pub flags: ReportFlags,
}

impl QualityReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{:.6}",
            self.algorithm,
            self.gamma,
            self.contrast_k,
            self.peak_x,
            self.peak_z,
            self.fwhm_x,
            self.fwhm_z,
            self.background_mean,
            self.elapsed
        )
    }
}

pub fn write_report_csv<W: Write>(mut out: W, reports: &[QualityReport]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in reports {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Width of the region above half of `peak` around index `at`, with the
/// crossings located by linear interpolation. `None` if a side never drops
/// below half maximum inside `values`.
fn half_max_width(values: &[f64], coords: &[f64], at: usize) -> Option<f64> {
    let half = values[at] / 2.0;
    let crossing = |inside: usize, outside: usize| {
        let (vi, vo) = (values[inside], values[outside]);
        let frac = (vi - half) / (vi - vo);
        coords[inside] + frac * (coords[outside] - coords[inside])
    };
    let left = values[..at]
        .iter()
        .rposition(|&v| v <= half)
        .map(|i| crossing(i + 1, i));
    let right = values[at + 1..].iter().position(|&v| v <= half).map(|off| {
        let i = at + 1 + off;
        crossing(i - 1, i)
    });
    Some(right? - left?)
}

/// Peak location, FWHM along x and z through the peak, and background level.
pub fn image_metrics(
    image: &DisplayImage,
    grid: &ImagingGrid,
    peak_window: &Region,
    background: &Region,
) -> Result<QualityReport> {
    let px = image.pixels();
    if px.dim() != (grid.nz(), grid.nx()) {
        return Err(Error::Parameter(format!(
            "image shape {:?} does not match grid {}x{}",
            px.dim(),
            grid.nz(),
            grid.nx()
        )));
    }
    let (wz, wx) = peak_window.indices(grid)?;
    let (bz, bx) = background.indices(grid)?;

    let mut peak = (wz.start, wx.start);
    let mut lo = f64::INFINITY;
    for iz in wz.clone() {
        for ix in wx.clone() {
            let v = px[(iz, ix)];
            if v > px[peak] {
                peak = (iz, ix);
            }
            lo = lo.min(v);
        }
    }
    let peak_value = px[peak];
    let no_peak = !(peak_value > lo);

    let xs = &grid.x_coords()[wx.clone()];
    let zs = &grid.z_coords()[wz.clone()];
    let window_w = xs[xs.len() - 1] - xs[0];
    let window_h = zs[zs.len() - 1] - zs[0];

    let (fwhm_x, x_clipped) = if no_peak {
        (window_w, true)
    } else {
        let line: Vec<f64> = wx.clone().map(|ix| px[(peak.0, ix)]).collect();
        match half_max_width(&line, xs, peak.1 - wx.start) {
            Some(w) => (w, false),
            None => (window_w, true),
        }
    };
    let (fwhm_z, z_clipped) = if no_peak {
        (window_h, true)
    } else {
        let line: Vec<f64> = wz.clone().map(|iz| px[(iz, peak.1)]).collect();
        match half_max_width(&line, zs, peak.0 - wz.start) {
            Some(w) => (w, false),
            None => (window_h, true),
        }
    };

    let mut sum = 0.0;
    let mut count = 0usize;
    for iz in bz {
        for ix in bx.clone() {
            sum += px[(iz, ix)];
            count += 1;
        }
    }
    let max = image.max();
    let background_mean = if max > 0.0 { sum / count as f64 / max } else { 0.0 };

    Ok(QualityReport {
        algorithm: String::new(),
        gamma: image.gamma(),
        contrast_k: image.contrast_k(),
        peak_x: grid.x_coords()[peak.1],
        peak_z: grid.z_coords()[peak.0],
        fwhm_x,
        fwhm_z,
        background_mean,
        elapsed: 0.0,
        flags: ReportFlags {
            no_peak,
            fwhm_x_clipped: x_clipped,
            fwhm_z_clipped: z_clipped,
        },
    })
}

/// Lateral and axial display profiles through a pixel, normalised to the image maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub lateral: Vec<(f64, f64)>,
    pub axial: Vec<(f64, f64)>,
}

pub fn profiles(image: &DisplayImage, grid: &ImagingGrid, iz: usize, ix: usize) -> Profile {
    let px = image.pixels();
    let max = image.max();
    let norm = if max > 0.0 { 1.0 / max } else { 0.0 };
    Profile {
        lateral: grid
            .x_coords()
            .iter()
            .enumerate()
            .map(|(j, &x)| (x, px[(iz, j)] * norm))
            .collect(),
        axial: grid
            .z_coords()
            .iter()
            .enumerate()
            .map(|(i, &z)| (z, px[(i, ix)] * norm))
            .collect(),
    }
}
