use std::fs;
use std::path::Path;

use super::DisplayImage;
use crate::error::{Error, Result};

/// Binary 16-bit PGM (`P5`, maxval 65535, big-endian samples). Rows run
/// from shallow to deep; `[0, max]` maps linearly onto `[0, 65535]`.
pub fn encode_pgm(image: &DisplayImage) -> Result<Vec<u8>> {
    let px = image.pixels();
    if let Some(v) = px.iter().find(|v| !v.is_finite()) {
        return Err(Error::Parameter(format!("cannot export non-finite pixel value {v}")));
    }
    let (height, width) = px.dim();
    let max = image.max();
    let scale = if max > 0.0 { 65535.0 / max } else { 0.0 };
    let header = format!("P5\n{width} {height}\n65535\n");
    let mut out = Vec::with_capacity(header.len() + 2 * width * height);
    out.extend_from_slice(header.as_bytes());
    for &v in px.iter() {
        let q = (v.max(0.0) * scale).round().min(65535.0) as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    Ok(out)
}

pub fn export_pgm(image: &DisplayImage, path: &Path) -> Result<()> {
    let bytes = encode_pgm(image)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
