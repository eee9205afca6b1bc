//! Per-pixel beamformers operating on a signal matrix, and whole-image
//! assembly.

mod coherence;
mod das;
mod fdmas;
mod image;
mod jcf;
mod minvar;

use std::f64::consts::PI;
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use coherence::{cf, cf_weights, gcf, gcf_weights, pcf, pcf_weights, phase_spread, ucf, ucf_weight, GcfKernel};
pub use das::das;
pub use fdmas::{fdmas, signed_sqrt};
pub use image::{beamform_image, beamform_image_with, BeamformedImage, ImageOptions};
pub use jcf::{jcf, jcf_direct, jcf_weights_direct, jcf_weights_factorized, jcf_with, JcfFactors};
pub use minvar::{cholesky_solve, compound_rows, minvar, minvar_compounded, smoothed_covariance, MinVarOutput};

/// Real, non-negative `M x N` weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    values: Array2<f64>,
}

impl WeightMatrix {
    pub fn new(values: Array2<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct JcfParams {
    alpha: f64,
}

impl JcfParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Parameter(format!(
                "JCF alpha must be finite and >= 0, got {alpha}"
            )));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for JcfParams {
    fn default() -> Self {
        Self { alpha: 2.0 }
    }
}

impl TryFrom<f64> for JcfParams {
    type Error = Error;
    fn try_from(alpha: f64) -> Result<Self> {
        Self::new(alpha)
    }
}

impl From<JcfParams> for f64 {
    fn from(p: JcfParams) -> f64 {
        p.alpha
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinVarParams {
    subarray: usize,
    axial_half_window: usize,
    loading: f64,
}

impl MinVarParams {
    pub fn new(subarray: usize, axial_half_window: usize, loading: f64) -> Result<Self> {
        if subarray == 0 {
            return Err(Error::Parameter("MinVar subarray length must be >= 1".into()));
        }
        if !(loading > 0.0 && loading.is_finite()) {
            return Err(Error::Parameter(format!(
                "MinVar diagonal loading must be > 0, got {loading}"
            )));
        }
        Ok(Self {
            subarray,
            axial_half_window,
            loading,
        })
    }

    pub fn subarray(&self) -> usize {
        self.subarray
    }

    pub fn axial_half_window(&self) -> usize {
        self.axial_half_window
    }

    pub fn loading(&self) -> f64 {
        self.loading
    }
}

pub const DEFAULT_GCF_CUTOFF: usize = 2;
pub const DEFAULT_PCF_GAMMA: f64 = 1.0;
pub const DEFAULT_MV_AXIAL: usize = 1;
pub const DEFAULT_MV_LOADING: f64 = 0.01;

pub fn default_pcf_sigma0() -> f64 {
    PI / 3f64.sqrt()
}

/// A beamforming method and its parameters. Parameters that default to a
/// function of the element count (`None`) are fixed by [`Method::resolve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    Das,
    Cf,
    Gcf {
        #[serde(default = "default_gcf_cutoff")]
        cutoff: usize,
    },
    Pcf {
        #[serde(default = "default_pcf_gamma")]
        gamma: f64,
        #[serde(default = "default_pcf_sigma0")]
        sigma0: f64,
    },
    Ucf,
    Fdmas {
        #[serde(default)]
        max_lag: Option<usize>,
    },
    #[serde(rename = "minvar")]
    MinVar {
        #[serde(default)]
        subarray: Option<usize>,
        #[serde(default = "default_mv_axial")]
        axial_half_window: usize,
        #[serde(default = "default_mv_loading")]
        loading: f64,
    },
    Jcf {
        #[serde(default)]
        alpha: JcfParams,
    },
    #[serde(rename = "jcf-direct")]
    JcfDirect {
        #[serde(default)]
        alpha: JcfParams,
    },
}

fn default_gcf_cutoff() -> usize {
    DEFAULT_GCF_CUTOFF
}
fn default_pcf_gamma() -> f64 {
    DEFAULT_PCF_GAMMA
}
fn default_mv_axial() -> usize {
    DEFAULT_MV_AXIAL
}
fn default_mv_loading() -> f64 {
    DEFAULT_MV_LOADING
}

/// Fallback parameters used when a method is named without its own.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodDefaults {
    pub alpha: f64,
    pub gcf_cutoff: usize,
    pub pcf_gamma: f64,
    pub pcf_sigma0: f64,
    pub mv_subarray: Option<usize>,
    pub mv_axial_half_window: usize,
    pub mv_loading: f64,
    pub dmas_max_lag: Option<usize>,
}

impl Default for MethodDefaults {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            gcf_cutoff: DEFAULT_GCF_CUTOFF,
            pcf_gamma: DEFAULT_PCF_GAMMA,
            pcf_sigma0: default_pcf_sigma0(),
            mv_subarray: None,
            mv_axial_half_window: DEFAULT_MV_AXIAL,
            mv_loading: DEFAULT_MV_LOADING,
            dmas_max_lag: None,
        }
    }
}

impl Method {
    pub fn jcf(alpha: f64) -> Result<Self> {
        Ok(Method::Jcf {
            alpha: JcfParams::new(alpha)?,
        })
    }

    /// Parses a method name, optionally with an inline JCF exponent
    /// (`jcf:3`, `jcf-direct:1.5`).
    pub fn parse(name: &str, defaults: &MethodDefaults) -> Result<Self> {
        let name = name.trim().to_ascii_lowercase();
        let (base, arg) = match name.split_once(':') {
            Some((b, a)) => (b, Some(a)),
            None => (name.as_str(), None),
        };
        let alpha = match arg {
            Some(a) => a
                .parse::<f64>()
                .map_err(|e| Error::Parameter(format!("bad alpha in {name:?}: {e}")))?,
            None => defaults.alpha,
        };
        if arg.is_some() && !base.starts_with("jcf") {
            return Err(Error::Parameter(format!(
                "only jcf methods take an inline parameter: {name:?}"
            )));
        }
        Ok(match base {
            "das" => Method::Das,
            "cf" => Method::Cf,
            "gcf" => Method::Gcf {
                cutoff: defaults.gcf_cutoff,
            },
            "pcf" => Method::Pcf {
                gamma: defaults.pcf_gamma,
                sigma0: defaults.pcf_sigma0,
            },
            "ucf" => Method::Ucf,
            "fdmas" => Method::Fdmas {
                max_lag: defaults.dmas_max_lag,
            },
            "minvar" => Method::MinVar {
                subarray: defaults.mv_subarray,
                axial_half_window: defaults.mv_axial_half_window,
                loading: defaults.mv_loading,
            },
            "jcf" => Method::Jcf {
                alpha: JcfParams::new(alpha)?,
            },
            "jcf-direct" => Method::JcfDirect {
                alpha: JcfParams::new(alpha)?,
            },
            other => {
                return Err(Error::Parameter(format!(
                    "unknown method {other:?}; expected one of das, cf, gcf, pcf, ucf, fdmas, minvar, jcf, jcf-direct"
                )))
            }
        })
    }

    /// Short identifier used for file names and report rows.
    pub fn label(&self) -> String {
        match self {
            Method::Das => "das".into(),
            Method::Cf => "cf".into(),
            Method::Gcf { .. } => "gcf".into(),
            Method::Pcf { .. } => "pcf".into(),
            Method::Ucf => "ucf".into(),
            Method::Fdmas { .. } => "fdmas".into(),
            Method::MinVar { .. } => "minvar".into(),
            Method::Jcf { alpha } => format!("jcf{}", alpha.alpha()),
            Method::JcfDirect { alpha } => format!("jcf{}-direct", alpha.alpha()),
        }
    }

    /// Validates parameters against an `N`-element aperture and fills in
    /// size-dependent defaults.
    pub fn resolve(&self, n_elements: usize) -> Result<ResolvedMethod> {
        Ok(match *self {
            Method::Das => ResolvedMethod::Das,
            Method::Cf => ResolvedMethod::Cf,
            Method::Gcf { cutoff } => {
                if cutoff >= n_elements {
                    return Err(Error::Parameter(format!(
                        "GCF cutoff {cutoff} must be < N = {n_elements}"
                    )));
                }
                ResolvedMethod::Gcf(GcfKernel::new(n_elements, cutoff))
            }
            Method::Pcf { gamma, sigma0 } => {
                if !(gamma >= 0.0 && gamma.is_finite()) {
                    return Err(Error::Parameter(format!("PCF gamma must be >= 0, got {gamma}")));
                }
                if !(sigma0 > 0.0 && sigma0.is_finite()) {
                    return Err(Error::Parameter(format!("PCF sigma0 must be > 0, got {sigma0}")));
                }
                ResolvedMethod::Pcf { gamma, sigma0 }
            }
            Method::Ucf => ResolvedMethod::Ucf,
            Method::Fdmas { max_lag } => {
                let lag = max_lag.unwrap_or(n_elements.saturating_sub(1));
                if lag == 0 || lag > n_elements.saturating_sub(1) {
                    return Err(Error::Parameter(format!(
                        "fDMAS max lag must be in 1..={}, got {lag}",
                        n_elements.saturating_sub(1)
                    )));
                }
                ResolvedMethod::Fdmas { max_lag: lag }
            }
            Method::MinVar {
                subarray,
                axial_half_window,
                loading,
            } => {
                let l = subarray.unwrap_or((n_elements / 4).max(1));
                if l > n_elements {
                    return Err(Error::Parameter(format!(
                        "MinVar subarray length {l} exceeds N = {n_elements}"
                    )));
                }
                ResolvedMethod::MinVar(MinVarParams::new(l, axial_half_window, loading)?)
            }
            Method::Jcf { alpha } => ResolvedMethod::Jcf(alpha),
            Method::JcfDirect { alpha } => ResolvedMethod::JcfDirect(alpha),
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// A method with every parameter fixed for a particular aperture size.
#[derive(Debug, Clone)]
pub enum ResolvedMethod {
    Das,
    Cf,
    Gcf(GcfKernel),
    Pcf { gamma: f64, sigma0: f64 },
    Ucf,
    Fdmas { max_lag: usize },
    MinVar(MinVarParams),
    Jcf(JcfParams),
    JcfDirect(JcfParams),
}
