use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use super::{
    cf, compound_rows, das, fdmas, jcf_direct, jcf_with, minvar_compounded, pcf, ucf, JcfFactors, Method,
    ResolvedMethod,
};
use crate::datapath::{AnalyticDataset, SignalMatrixBuilder};
use crate::error::Result;
use crate::geometry::{ImagingGrid, ReceiveAperture};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ImageOptions {
    pub aperture: ReceiveAperture,
}

/// Complex beamformed field on an imaging grid, indexed `[iz][ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformedImage {
    pub label: String,
    pub field: Array2<Complex64>,
    pub grid: ImagingGrid,
    /// Pixels `(iz, ix)` where the method fell back (MinVar singular covariance).
    pub flagged: Vec<(usize, usize)>,
}

impl BeamformedImage {
    pub fn magnitudes(&self) -> Array2<f64> {
        self.field.mapv(|v| v.norm())
    }

    /// Same field, relabelled; used when treating a derived field as a new image.
    pub fn with_field(&self, label: impl Into<String>, field: Array2<Complex64>) -> Self {
        Self {
            label: label.into(),
            field,
            grid: self.grid.clone(),
            flagged: Vec::new(),
        }
    }
}

pub fn beamform_image(data: &AnalyticDataset, grid: &ImagingGrid, method: &Method) -> Result<BeamformedImage> {
    beamform_image_with(data, grid, method, &ImageOptions::default())
}

/// Forms every grid pixel with `method`. Pixels are independent and each is
/// summed in a fixed order, so the result does not depend on the number of
/// worker threads.
pub fn beamform_image_with(
    data: &AnalyticDataset,
    grid: &ImagingGrid,
    method: &Method,
    options: &ImageOptions,
) -> Result<BeamformedImage> {
    let (m_count, n_count, _) = data.dims();
    let resolved = method.resolve(n_count)?;
    let builder = SignalMatrixBuilder::for_grid(data, grid, options.aperture);
    let (nz, nx) = (grid.nz(), grid.nx());

    let rows: Vec<(Vec<Complex64>, Vec<usize>)> = (0..nz)
        .into_par_iter()
        .map(|iz| {
            let mut s = Array2::<Complex64>::zeros((m_count, n_count));
            let mut rx = Vec::with_capacity(n_count);
            let mut factors = JcfFactors::default();
            let mut row = Vec::with_capacity(nx);
            let mut flagged = Vec::new();
            for ix in 0..nx {
                let value = match &resolved {
                    ResolvedMethod::MinVar(p) => {
                        let k = p.axial_half_window();
                        let lo = iz.saturating_sub(k);
                        let hi = (iz + k).min(nz - 1);
                        let snapshots: Vec<Vec<Complex64>> = (lo..=hi)
                            .map(|jz| {
                                builder.fill(grid.pixel(jz, ix), s.view_mut(), &mut rx);
                                compound_rows(s.view())
                            })
                            .collect();
                        let out = minvar_compounded(&snapshots, iz - lo, p);
                        if out.singular {
                            flagged.push(ix);
                        }
                        out.value
                    }
                    other => {
                        builder.fill(grid.pixel(iz, ix), s.view_mut(), &mut rx);
                        let v = s.view();
                        match other {
                            ResolvedMethod::Das => das(v),
                            ResolvedMethod::Cf => cf(v),
                            ResolvedMethod::Gcf(kernel) => kernel.beamform(v),
                            ResolvedMethod::Pcf { gamma, sigma0 } => pcf(v, *gamma, *sigma0),
                            ResolvedMethod::Ucf => ucf(v),
                            ResolvedMethod::Fdmas { max_lag } => Complex64::new(fdmas(v, *max_lag), 0.0),
                            ResolvedMethod::Jcf(p) => jcf_with(v, *p, &mut factors),
                            ResolvedMethod::JcfDirect(p) => jcf_direct(v, *p),
                            ResolvedMethod::MinVar(_) => unreachable!(),
                        }
                    }
                };
                row.push(value);
            }
            (row, flagged)
        })
        .collect();

    let mut field = Vec::with_capacity(nz * nx);
    let mut flagged = Vec::new();
    for (iz, (row, flags)) in rows.into_iter().enumerate() {
        field.extend(row);
        flagged.extend(flags.into_iter().map(|ix| (iz, ix)));
    }
    Ok(BeamformedImage {
        label: method.label(),
        field: Array2::from_shape_vec((nz, nx), field).expect("row lengths match grid"),
        grid: grid.clone(),
        flagged,
    })
}
