#![no_main]

use cpwc::geometry::{GridSpec, ImagingGrid};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = text.parse::<GridSpec>() {
        // A spec that parses must also validate and stay within the pixel cap.
        spec.validate().expect("parsed grid spec validates");
        if spec.nx.saturating_mul(spec.nz) <= 1 << 16 {
            ImagingGrid::from_spec(&spec, 1540.0).expect("parsed grid spec builds");
        }
    }
});
